//! Parametrized surfaces in `e^{2q}dt^2 + ds^2 + dz^2`: fundamental forms, the
//! biharmonic surface system, CMC classification, Hopf cylinders and the umbilic test.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::{product_base_curvature, FrameField};
use crate::geometry::{
    christoffel_symbols, laplace_beltrami, ricci_chart, Metric, ProductMetric3, TensorMetric,
};
use crate::numkernel::{partial, raw_partial, ChartBox, ChartPoint, ScalarField};
use crate::report::{sweep, ResidualReport};

/// `(u, v) -> (t, s, z)` together with the ambient metric.
#[derive(Debug, Clone)]
pub struct SurfaceImmersion {
    pub map: [ScalarField; 3],
    pub ambient: Arc<ProductMetric3>,
    pub uv_box: ChartBox,
    /// +1 keeps the chart-order normal, -1 flips it.
    pub orientation: f64,
}

impl SurfaceImmersion {
    pub fn new(
        map: [ScalarField; 3],
        ambient: Arc<ProductMetric3>,
        uv_box: ChartBox,
    ) -> Result<Self> {
        if uv_box.dim() != 2 {
            return Err(Error::InvalidArgument(
                "uv box must be two-dimensional".into(),
            ));
        }
        let map = map.map(|f| f.with_domain(uv_box));
        Ok(Self {
            map,
            ambient,
            uv_box,
            orientation: 1.0,
        })
    }

    pub fn flipped(&self) -> Self {
        Self {
            orientation: -self.orientation,
            ..self.clone()
        }
    }

    pub fn image(&self, uv: &ChartPoint) -> Result<ChartPoint> {
        Ok(ChartPoint::xyz(
            self.map[0].value(uv)?,
            self.map[1].value(uv)?,
            self.map[2].value(uv)?,
        ))
    }

    fn tangents(&self, uv: &ChartPoint) -> Result<[[f64; 3]; 2]> {
        let mut t = [[0.0; 3]; 2];
        for (a, row) in t.iter_mut().enumerate() {
            for (i, c) in row.iter_mut().enumerate() {
                *c = partial(&self.map[i], uv, &[a])?;
            }
        }
        Ok(t)
    }

    /// Induced metric components as fields on the uv chart.
    fn induced_component(&self, a: usize, b: usize) -> ScalarField {
        let map = self.map.clone();
        let ambient = self.ambient.clone();
        let depth = map.iter().map(|f| f.depth_after(1)).max().unwrap_or(0);
        let field = ScalarField::derived(depth, move |uv| {
            let p = ChartPoint::xyz(
                map[0].eval_raw(uv),
                map[1].eval_raw(uv),
                map[2].eval_raw(uv),
            );
            let Ok(g) = ambient.tensor(&p) else {
                return f64::NAN;
            };
            let ta: Vec<f64> = map.iter().map(|f| first(f, uv, a)).collect();
            let tb: Vec<f64> = map.iter().map(|f| first(f, uv, b)).collect();
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    acc += g[i][j] * ta[i] * tb[j];
                }
            }
            acc
        });
        field.with_domain(self.uv_box)
    }

    pub fn induced_metric(&self) -> TensorMetric {
        TensorMetric::new(2, |a, b| self.induced_component(a, b))
    }

    /// Orthonormal tangent frame on the uv chart: first leg along `d_u`.
    pub fn tangent_frame(&self) -> Result<FrameField> {
        let g11 = self.induced_component(0, 0);
        let g12 = self.induced_component(0, 1);
        let g22 = self.induced_component(1, 1);
        let depth = g11.fd_depth();
        let dom = self.uv_box;
        let coeff = move |which: usize| {
            let (g11, g12, g22) = (g11.clone(), g12.clone(), g22.clone());
            ScalarField::derived(depth, move |uv| {
                gram_schmidt(g11.eval_raw(uv), g12.eval_raw(uv), g22.eval_raw(uv))[which]
            })
            .with_domain(dom)
        };
        let legs = vec![vec![coeff(0), coeff(1)], vec![coeff(2), coeff(3)]];
        FrameField::new(legs, Arc::new(self.induced_metric()))
    }
}

fn first(f: &ScalarField, uv: &ChartPoint, a: usize) -> f64 {
    f.analytic(uv, &[a])
        .unwrap_or_else(|| raw_partial(f, uv, &[a]))
}

/// uv coefficients `[w1_u, w1_v, w2_u, w2_v]` of the Gram-Schmidt frame.
fn gram_schmidt(g11: f64, g12: f64, g22: f64) -> [f64; 4] {
    let n1 = g11.sqrt();
    let n2 = ((g11 * g22 - g12 * g12) / g11).sqrt();
    [1.0 / n1, 0.0, -g12 / (g11 * n2), 1.0 / n2]
}

/// First and second fundamental data at one uv point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceGeometry {
    pub induced_metric: [[f64; 2]; 2],
    pub unit_normal: [f64; 3],
    /// Shape operator in the Gram-Schmidt frame.
    pub shape_operator: [[f64; 2]; 2],
    pub mean_curvature: f64,
    pub shape_norm_sq: f64,
    /// Ambient chart components of the orthonormal tangents.
    pub tangents: [[f64; 3]; 2],
}

pub fn surface_geometry(imm: &SurfaceImmersion, uv: &ChartPoint) -> Result<SurfaceGeometry> {
    let p = imm.image(uv)?;
    let t = imm.tangents(uv)?;
    let g = imm.ambient.jet(&p, 0)?.g;
    let ginv = imm.ambient.jet(&p, 0)?.inverse()?;
    let gamma = christoffel_symbols(imm.ambient.as_ref(), &p)?;
    let ip = |x: &[f64; 3], y: &[f64; 3]| -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += g[i][j] * x[i] * y[j];
            }
        }
        acc
    };
    let h = [
        [ip(&t[0], &t[0]), ip(&t[0], &t[1])],
        [ip(&t[1], &t[0]), ip(&t[1], &t[1])],
    ];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if !(det > 1e-10) {
        return Err(Error::DegenerateImmersion {
            point: uv.coords().to_vec(),
        });
    }
    // covector annihilating both tangents, raised and normalized
    let (a, b) = (&t[0], &t[1]);
    let nu = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let mut xi = [0.0; 3];
    for (i, x) in xi.iter_mut().enumerate() {
        *x = (0..3).map(|j| ginv[i][j] * nu[j]).sum();
    }
    let norm = ip(&xi, &xi).sqrt() * imm.orientation;
    for x in xi.iter_mut() {
        *x /= norm;
    }
    let mut bform = [[0.0; 2]; 2];
    for (r, row) in bform.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            let mut acc = [0.0; 3];
            for (k, v) in acc.iter_mut().enumerate() {
                *v = partial(&imm.map[k], uv, &[r, c])?;
                for i in 0..3 {
                    for j in 0..3 {
                        *v += gamma[k][i][j] * t[r][i] * t[c][j];
                    }
                }
            }
            *entry = ip(&acc, &xi);
        }
    }
    let gs = gram_schmidt(h[0][0], h[0][1], h[1][1]);
    let pm = [[gs[0], gs[2]], [gs[1], gs[3]]]; // pm[a][i]: uv component a of leg i
    let mut shape = [[0.0; 2]; 2];
    for (i, row) in shape.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    acc += pm[a][i] * pm[b][j] * bform[a][b];
                }
            }
            *entry = acc;
        }
    }
    let mut tangents = [[0.0; 3]; 2];
    for (i, w) in tangents.iter_mut().enumerate() {
        for (k, c) in w.iter_mut().enumerate() {
            *c = pm[0][i] * t[0][k] + pm[1][i] * t[1][k];
        }
    }
    let mean = 0.5 * (shape[0][0] + shape[1][1]);
    let norm_sq = shape.iter().flatten().map(|x| x * x).sum();
    Ok(SurfaceGeometry {
        induced_metric: h,
        unit_normal: xi,
        shape_operator: shape,
        mean_curvature: mean,
        shape_norm_sq: norm_sq,
        tangents,
    })
}

/// Ambient Ricci terms, by contraction and by the product closed forms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbientRicci {
    pub ric_normal: f64,
    pub ric_tangent: [f64; 2],
    pub closed_normal: f64,
    pub closed_tangent: [f64; 2],
}

impl AmbientRicci {
    pub fn path_disagreement(&self) -> f64 {
        (self.ric_normal - self.closed_normal)
            .abs()
            .max((self.ric_tangent[0] - self.closed_tangent[0]).abs())
            .max((self.ric_tangent[1] - self.closed_tangent[1]).abs())
    }
}

pub fn ambient_ricci(imm: &SurfaceImmersion, uv: &ChartPoint) -> Result<AmbientRicci> {
    let geo = surface_geometry(imm, uv)?;
    ricci_with(imm, uv, &geo)
}

fn ricci_with(
    imm: &SurfaceImmersion,
    uv: &ChartPoint,
    geo: &SurfaceGeometry,
) -> Result<AmbientRicci> {
    let p = imm.image(uv)?;
    let ric = ricci_chart(imm.ambient.as_ref(), &p)?;
    let form = |x: &[f64; 3], y: &[f64; 3]| -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += ric[i][j] * x[i] * y[j];
            }
        }
        acc
    };
    let xi = &geo.unit_normal;
    let k = product_base_curvature(&imm.ambient).value(&p)?;
    // <X, E_3> is the z component since g_zz = 1 and g_tz = g_sz = 0
    let a33 = xi[2];
    let (a13, a23) = (geo.tangents[0][2], geo.tangents[1][2]);
    Ok(AmbientRicci {
        ric_normal: form(xi, xi),
        ric_tangent: [form(xi, &geo.tangents[0]), form(xi, &geo.tangents[1])],
        closed_normal: (1.0 - a33 * a33) * k,
        closed_tangent: [-a33 * a13 * k, -a33 * a23 * k],
    })
}

/// Mean curvature as a field on the uv chart. It involves second derivatives of the
/// immersion, so it is differentiated with the coarse stencil.
pub fn mean_curvature_field(imm: &SurfaceImmersion) -> ScalarField {
    let im = imm.clone();
    ScalarField::derived(2, move |uv| {
        surface_geometry(&im, uv)
            .map(|g| g.mean_curvature)
            .unwrap_or(f64::NAN)
    })
    .with_domain(imm.uv_box)
}

/// `(Delta H - H|A|^2 + H Ric(xi,xi), 2A(grad H) + 2H grad H - 2H (Ric xi)^T)`.
pub fn biharmonic_residuals_surface(
    imm: &SurfaceImmersion,
    uv: &ChartPoint,
) -> Result<(f64, [f64; 2])> {
    let geo = surface_geometry(imm, uv)?;
    let ric = ricci_with(imm, uv, &geo)?;
    let h_field = mean_curvature_field(imm);
    let frame = imm.tangent_frame()?;
    let lap_h = laplace_beltrami(&frame, &h_field, uv)?;
    let grad = [frame.apply(0, &h_field, uv)?, frame.apply(1, &h_field, uv)?];
    let h = geo.mean_curvature;
    let a = &geo.shape_operator;
    let scalar = lap_h - h * geo.shape_norm_sq + h * ric.ric_normal;
    let mut tangent = [0.0; 2];
    for (i, t) in tangent.iter_mut().enumerate() {
        let a_grad = a[i][0] * grad[0] + a[i][1] * grad[1];
        *t = 2.0 * a_grad + 2.0 * h * grad[i] - 2.0 * h * ric.ric_tangent[i];
    }
    Ok((scalar, tangent))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CmcClass {
    Minimal,
    ProperBiharmonicVerticalCylinder,
    NotBiharmonic,
}

#[derive(Debug, Clone, Serialize)]
pub struct CmcClassification {
    pub class: CmcClass,
    pub mean_curvature: f64,
    pub sphere_radius: Option<f64>,
    pub circle_radius: Option<f64>,
    pub report: ResidualReport,
}

/// Classifies a CMC surface. The proper case needs a vertical normal component of
/// zero and `|A|^2 = K^{M^2} = 4H^2`.
pub fn cmc_classify(
    imm: &SurfaceImmersion,
    points: &[ChartPoint],
    tol: f64,
) -> Result<CmcClassification> {
    let geos: Vec<SurfaceGeometry> = points
        .iter()
        .map(|p| surface_geometry(imm, p))
        .collect::<Result<_>>()?;
    let hs: Vec<f64> = geos.iter().map(|g| g.mean_curvature).collect();
    let lo = hs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = hs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = hs.iter().sum::<f64>() / hs.len().max(1) as f64;
    let spread = hi - lo;
    if !(spread <= tol * mean.abs().max(1.0)) {
        return Err(Error::NotCmc { spread });
    }
    let k_base = product_base_curvature(&imm.ambient);
    let report = sweep(
        "cmc",
        points,
        tol,
        &["a33", "|A|^2 - 4H^2", "K - 4H^2"],
        |uv| {
            let g = surface_geometry(imm, uv)?;
            let k = k_base.value(&imm.image(uv)?)?;
            let h2 = 4.0 * g.mean_curvature * g.mean_curvature;
            Ok(vec![g.unit_normal[2], g.shape_norm_sq - h2, k - h2])
        },
    )?;
    let (class, sphere, circle) = if mean.abs() <= tol {
        (CmcClass::Minimal, None, None)
    } else if report.passed() {
        let h = mean.abs();
        (
            CmcClass::ProperBiharmonicVerticalCylinder,
            Some(1.0 / (2.0 * h)),
            Some(1.0 / (2.0 * 2f64.sqrt() * h)),
        )
    } else {
        (CmcClass::NotBiharmonic, None, None)
    };
    Ok(CmcClassification {
        class,
        mean_curvature: mean,
        sphere_radius: sphere,
        circle_radius: circle,
        report,
    })
}

/// Preimage of a curve with geodesic curvature `k_g(s)` in a surface of curvature
/// `K(s)`, both along arclength.
#[derive(Debug, Clone)]
pub struct HopfCylinderSpec {
    pub geodesic_curvature: ScalarField,
    pub base_curvature: ScalarField,
}

impl HopfCylinderSpec {
    pub fn constant(kg: f64, k: f64) -> Self {
        Self {
            geodesic_curvature: ScalarField::constant(kg),
            base_curvature: ScalarField::constant(k),
        }
    }

    pub fn is_minimal_at(&self, s: f64) -> Result<bool> {
        Ok(self.geodesic_curvature.value(&ChartPoint::new(&[s]))? == 0.0)
    }
}

/// `(k'' - k^3 + k K, 3 k' k)`.
pub fn hopf_cylinder_residuals(spec: &HopfCylinderSpec, s: f64) -> Result<(f64, f64)> {
    let p = ChartPoint::new(&[s]);
    let k = spec.geodesic_curvature.value(&p)?;
    let k1 = partial(&spec.geodesic_curvature, &p, &[0])?;
    let k2 = partial(&spec.geodesic_curvature, &p, &[0, 0])?;
    let kk = spec.base_curvature.value(&p)?;
    Ok((k2 - k * k * k + k * kk, 3.0 * k1 * k))
}

#[derive(Debug, Clone, Serialize)]
pub struct UmbilicVerdict {
    pub minimal: bool,
    pub biharmonic: bool,
    pub passed: bool,
    pub report: ResidualReport,
}

/// For totally umbilical surfaces, biharmonic must mean minimal.
pub fn umbilic_biharmonic_test(
    imm: &SurfaceImmersion,
    points: &[ChartPoint],
    tol: f64,
) -> Result<UmbilicVerdict> {
    let mut deviation: f64 = 0.0;
    let mut max_h: f64 = 0.0;
    for p in points {
        let g = surface_geometry(imm, p)?;
        let a = g.shape_operator;
        let h = g.mean_curvature;
        let d = ((a[0][0] - h).powi(2) + (a[1][1] - h).powi(2) + a[0][1].powi(2) + a[1][0].powi(2))
            .sqrt();
        deviation = deviation.max(d);
        max_h = max_h.max(h.abs());
    }
    if deviation > tol {
        return Err(Error::NotUmbilic { deviation });
    }
    let report = sweep("umbilic", points, tol, &["scalar", "tangent"], |p| {
        let (s, t) = biharmonic_residuals_surface(imm, p)?;
        Ok(vec![s, t[0].abs().max(t[1].abs())])
    })?;
    let minimal = max_h <= tol;
    let biharmonic = report.passed();
    Ok(UmbilicVerdict {
        minimal,
        biharmonic,
        passed: minimal || !biharmonic,
        report,
    })
}

/// Exponent `q(s)` of a constant-curvature surface factor in geodesic polar form,
/// and the radius `s0` of the parallel with geodesic curvature `kg`.
pub fn polar_factor(kg: f64, k: f64) -> Result<(ScalarField, f64)> {
    if !(kg > 0.0) {
        return Err(Error::InvalidArgument(
            "geodesic curvature must be positive".into(),
        ));
    }
    if k > 0.0 {
        let r = 1.0 / k.sqrt();
        let q = ScalarField::univariate(1, move |s| {
            let (sn, cs) = (s / r).sin_cos();
            let cot = cs / sn;
            let csc2 = 1.0 / (sn * sn);
            [
                (r * sn).ln(),
                cot / r,
                -csc2 / (r * r),
                2.0 * csc2 * cot / (r * r * r),
            ]
        });
        Ok((q, r * (1.0 / (r * kg)).atan()))
    } else if k == 0.0 {
        let q =
            ScalarField::univariate(1, |s| [s.ln(), 1.0 / s, -1.0 / (s * s), 2.0 / (s * s * s)]);
        Ok((q, 1.0 / kg))
    } else {
        let c = (-k).sqrt();
        if !(kg > c) {
            return Err(Error::InvalidArgument(format!(
                "no geodesic circle with k_g = {kg} when K = {k}"
            )));
        }
        let q = ScalarField::univariate(1, move |s| {
            let x = c * s;
            let coth = x.cosh() / x.sinh();
            let csch2 = 1.0 / (x.sinh() * x.sinh());
            [
                (x.sinh() / c).ln(),
                c * coth,
                -c * c * csch2,
                2.0 * c * c * c * csch2 * coth,
            ]
        });
        Ok((q, (c / kg).atanh() / c))
    }
}

fn uv_box() -> ChartBox {
    ChartBox::new(&[0.0, 0.0], &[1.0, 1.0], 0.05).expect("static box")
}

/// Vertical cylinder over a geodesic circle with curvature `kg` in `M^2(K) x R`.
pub fn vertical_cylinder(kg: f64, k: f64) -> Result<SurfaceImmersion> {
    let (q, s0) = polar_factor(kg, k)?;
    let ambient = Arc::new(ProductMetric3::product3(q));
    SurfaceImmersion::new(
        [
            ScalarField::coordinate(0),
            ScalarField::constant(s0),
            ScalarField::coordinate(1),
        ],
        ambient,
        uv_box(),
    )
}

/// `M^2 x {z0}` for the given factor exponent.
pub fn horizontal_slice(q: ScalarField, z0: f64, s_range: (f64, f64)) -> Result<SurfaceImmersion> {
    let b = ChartBox::new(&[0.0, s_range.0], &[1.0, s_range.1], 0.05)?;
    SurfaceImmersion::new(
        [
            ScalarField::coordinate(0),
            ScalarField::coordinate(1),
            ScalarField::constant(z0),
        ],
        Arc::new(ProductMetric3::product3(q)),
        b,
    )
}

/// Graph `z = u^2 / 2` over flat space, centred at the origin.
pub fn parabolic_graph() -> Result<SurfaceImmersion> {
    let b = ChartBox::new(&[-0.5, -0.5], &[0.5, 0.5], 0.05)?;
    SurfaceImmersion::new(
        [
            ScalarField::coordinate(0),
            ScalarField::coordinate(1),
            ScalarField::univariate(0, |u| [0.5 * u * u, u, 1.0, 0.0]),
        ],
        Arc::new(ProductMetric3::flat(3)),
        b,
    )
}

/// Unit sphere in flat space, `(u, v)` polar and azimuthal angles.
pub fn round_sphere() -> Result<SurfaceImmersion> {
    let b = ChartBox::new(&[0.5, 0.0], &[2.5, 2.0], 0.05)?;
    let u = ScalarField::coordinate(0);
    let v = ScalarField::coordinate(1);
    SurfaceImmersion::new(
        [u.sin().mul(&v.cos()), u.sin().mul(&v.sin()), u.cos()],
        Arc::new(ProductMetric3::flat(3)),
        b,
    )
}

/// `z = a u + b v` in flat space.
pub fn tilted_plane(a: f64, b: f64) -> Result<SurfaceImmersion> {
    let u = ScalarField::coordinate(0);
    let v = ScalarField::coordinate(1);
    SurfaceImmersion::new(
        [u.clone(), v.clone(), u.scaled(a).sum(&v.scaled(b))],
        Arc::new(ProductMetric3::flat(3)),
        uv_box(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{sample_grid, DerivativeMode};
    use proptest::prelude::*;

    fn mid() -> ChartPoint {
        ChartPoint::xy(0.5, 0.5)
    }

    #[test]
    fn slice_and_graph() {
        let slice = horizontal_slice(ScalarField::constant(0.0), 0.3, (0.0, 1.0)).unwrap();
        let g = surface_geometry(&slice, &mid()).unwrap();
        assert_eq!(g.mean_curvature, 0.0);
        assert!(g.shape_operator.iter().flatten().all(|&x| x == 0.0));

        let graph = parabolic_graph().unwrap();
        let g = surface_geometry(&graph, &ChartPoint::xy(0.0, 0.0)).unwrap();
        assert!((g.mean_curvature - 0.5).abs() < 1e-12);
        // graph oracle away from the origin: H = u''/(2 (1+u'^2)^{3/2})
        let x: f64 = 0.3;
        let g = surface_geometry(&graph, &ChartPoint::xy(x, 0.1)).unwrap();
        assert!((g.mean_curvature - 0.5 / (1.0 + x * x).powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn cylinder_geometry_and_ricci() {
        let cyl = vertical_cylinder(1.0, 1.0).unwrap();
        let g = surface_geometry(&cyl, &mid()).unwrap();
        assert!((g.mean_curvature - 0.5).abs() < 1e-12);
        assert!((g.shape_norm_sq - 1.0).abs() < 1e-12);
        // principal curvatures (2H, 0)
        assert!(g.shape_operator[0][1].abs() < 1e-12 && g.shape_operator[1][1].abs() < 1e-12);
        let r = ambient_ricci(&cyl, &mid()).unwrap();
        assert!((r.ric_normal - 1.0).abs() < 1e-10);
        assert!(r.ric_tangent.iter().all(|x| x.abs() < 1e-10));
        assert!(r.path_disagreement() < 1e-10);

        let slice = horizontal_slice(
            ScalarField::univariate(1, |s| {
                [
                    s.sin().ln(),
                    s.cos() / s.sin(),
                    -1.0 / s.sin().powi(2),
                    2.0 * s.cos() / s.sin().powi(3),
                ]
            }),
            0.0,
            (0.5, 1.5),
        )
        .unwrap();
        let r = ambient_ricci(&slice, &ChartPoint::xy(0.5, 1.0)).unwrap();
        assert!(r.ric_normal.abs() < 1e-10);

        let r = ambient_ricci(&tilted_plane(0.3, -0.7).unwrap(), &mid()).unwrap();
        assert_eq!(r.ric_normal, 0.0);
        assert_eq!(r.ric_tangent, [0.0, 0.0]);
    }

    #[test]
    fn cylinder_residuals() {
        let cyl = vertical_cylinder(1.0, 1.0).unwrap();
        let (s, t) = biharmonic_residuals_surface(&cyl, &mid()).unwrap();
        assert!(
            s.abs() < 1e-8 && t.iter().all(|x| x.abs() < 1e-8),
            "{s} {t:?}"
        );

        let slice = horizontal_slice(ScalarField::constant(0.0), 0.0, (0.0, 1.0)).unwrap();
        let (s, t) = biharmonic_residuals_surface(&slice, &mid()).unwrap();
        assert_eq!((s, t), (0.0, [0.0, 0.0]));

        let wide = vertical_cylinder(2.0, 1.0).unwrap();
        let (s, _) = biharmonic_residuals_surface(&wide, &mid()).unwrap();
        assert!((s + 3.0).abs() < 1e-9, "{s}");
    }

    #[test]
    fn cmc_examples() {
        let pts = sample_grid(&uv_box(), &[5, 5]).unwrap();
        let c = cmc_classify(&vertical_cylinder(1.0, 1.0).unwrap(), &pts, 1e-8).unwrap();
        assert_eq!(c.class, CmcClass::ProperBiharmonicVerticalCylinder);
        assert!((c.sphere_radius.unwrap() - 1.0).abs() < 1e-9);
        assert!((c.circle_radius.unwrap() - 0.5f64.sqrt()).abs() < 1e-9);

        let slice = horizontal_slice(ScalarField::constant(0.0), 0.0, (0.0, 1.0)).unwrap();
        assert_eq!(
            cmc_classify(&slice, &pts, 1e-8).unwrap().class,
            CmcClass::Minimal
        );

        let flat_cyl = vertical_cylinder(1.0, 0.0).unwrap();
        assert_eq!(
            cmc_classify(&flat_cyl, &pts, 1e-8).unwrap().class,
            CmcClass::NotBiharmonic
        );

        let graph = parabolic_graph().unwrap();
        let gpts = sample_grid(&graph.uv_box, &[3, 3]).unwrap();
        assert!(matches!(
            cmc_classify(&graph, &gpts, 1e-8),
            Err(Error::NotCmc { .. })
        ));
    }

    #[test]
    fn hopf_examples() {
        assert_eq!(
            hopf_cylinder_residuals(&HopfCylinderSpec::constant(1.0, 1.0), 0.3).unwrap(),
            (0.0, 0.0)
        );
        let (r1, r2) = hopf_cylinder_residuals(&HopfCylinderSpec::constant(1.0, 2.0), 0.3).unwrap();
        assert!((r1 - 1.0).abs() < 1e-12 && r2 == 0.0);
        let zero = HopfCylinderSpec::constant(0.0, 5.0);
        assert_eq!(hopf_cylinder_residuals(&zero, 0.3).unwrap(), (0.0, 0.0));
        assert!(zero.is_minimal_at(0.3).unwrap());
        // k = s: r1 = -s^3 + s K, r2 = 3 s
        let lin = HopfCylinderSpec {
            geodesic_curvature: ScalarField::coordinate(0),
            base_curvature: ScalarField::constant(1.0),
        };
        let (r1, r2) = hopf_cylinder_residuals(&lin, 0.5).unwrap();
        assert!((r1 - (-0.125 + 0.5)).abs() < 1e-12 && (r2 - 1.5).abs() < 1e-12);
    }

    #[test]
    fn umbilic_examples() {
        let pts = sample_grid(&uv_box(), &[3, 3]).unwrap();
        let slice = horizontal_slice(ScalarField::constant(0.0), 0.0, (0.0, 1.0)).unwrap();
        let v = umbilic_biharmonic_test(&slice, &pts, 1e-8).unwrap();
        assert!(v.minimal && v.passed);

        let sphere = round_sphere().unwrap();
        let spts = sample_grid(&sphere.uv_box, &[3, 3]).unwrap();
        let v = umbilic_biharmonic_test(&sphere, &spts, 1e-6).unwrap();
        assert!(!v.minimal && !v.biharmonic && v.passed);
        // scalar residual -H|A|^2 = 2 for the outward unit normal (H = -1)
        assert!((v.report.max_abs("scalar") - 2.0).abs() < 1e-5);

        let cyl = vertical_cylinder(1.0, 1.0).unwrap();
        assert!(matches!(
            umbilic_biharmonic_test(&cyl, &pts, 1e-8),
            Err(Error::NotUmbilic { .. })
        ));
    }

    #[test]
    fn fd_mode_cylinder() {
        let cyl = vertical_cylinder(1.0, 1.0).unwrap();
        let fd = SurfaceImmersion::new(
            cyl.map.clone().map(|f| f.in_mode(DerivativeMode::Fd)),
            Arc::new(ProductMetric3::product3(
                cyl.ambient.exponent().clone().in_mode(DerivativeMode::Fd),
            )),
            cyl.uv_box,
        )
        .unwrap();
        let (s, t) = biharmonic_residuals_surface(&fd, &mid()).unwrap();
        assert!(s.abs() < 1e-3 && t.iter().all(|x| x.abs() < 1e-3));
    }

    fn random_graph(a: f64, b: f64, c: f64) -> SurfaceImmersion {
        let u = ScalarField::coordinate(0);
        let v = ScalarField::coordinate(1);
        let s = ScalarField::coordinate(1);
        let q = s.scaled(a).sin().sum(&s.square().scaled(0.2));
        let h = u.mul(&v).scaled(b).sin().sum(&u.square().scaled(c));
        SurfaceImmersion::new(
            [u, v.sum(&ScalarField::constant(0.5)), h],
            Arc::new(ProductMetric3::product3(q)),
            uv_box(),
        )
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn ricci_paths_agree(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -0.5f64..0.5,
                             u in 0.1f64..0.9, v in 0.1f64..0.9) {
            let imm = random_graph(a, b, c);
            let r = ambient_ricci(&imm, &ChartPoint::xy(u, v)).unwrap();
            prop_assert!(r.path_disagreement() < 1e-6);
        }

        #[test]
        fn orientation_flip(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -0.5f64..0.5,
                            u in 0.2f64..0.8, v in 0.2f64..0.8) {
            let imm = random_graph(a, b, c);
            let p = ChartPoint::xy(u, v);
            let g = surface_geometry(&imm, &p).unwrap();
            let gf = surface_geometry(&imm.flipped(), &p).unwrap();
            prop_assert!((g.mean_curvature + gf.mean_curvature).abs() < 1e-12);
            prop_assert!(g.shape_norm_sq >= 2.0 * g.mean_curvature.powi(2) - 1e-12);
            let (s, t) = biharmonic_residuals_surface(&imm, &p).unwrap();
            let (sf, tf) = biharmonic_residuals_surface(&imm.flipped(), &p).unwrap();
            prop_assert!((s + sf).abs() < 1e-6 * (1.0 + s.abs()));
            prop_assert!((t[0] - tf[0]).abs() < 1e-6 && (t[1] - tf[1]).abs() < 1e-6);
            // unit normal orthogonal to the tangents
            let gm = imm.ambient.tensor(&imm.image(&p).unwrap()).unwrap();
            for w in &g.tangents {
                let ip: f64 = (0..3).map(|i| gm[i][i] * w[i] * g.unit_normal[i]).sum();
                prop_assert!(ip.abs() < 1e-8);
            }
        }
    }
}
