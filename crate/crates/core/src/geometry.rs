//! Chart metrics, Levi-Civita connection, curvature and the frame Laplacian.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::frames::FrameField;
use crate::numkernel::{partial, ChartPoint, ScalarField};

pub type Tensor2 = [[f64; 3]; 3];
pub type Tensor3 = [[[f64; 3]; 3]; 3];
pub type Tensor4 = [[[[f64; 3]; 3]; 3]; 3];

/// Metric components and their first and second chart partials, padded to 3x3.
/// `dg[k][i][j] = d_k g_ij`, `ddg[k][l][i][j] = d_k d_l g_ij`. Unused axes carry the
/// identity so that padded charts decouple.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet {
    pub g: Tensor2,
    pub dg: Tensor3,
    pub ddg: Tensor4,
}

impl MetricJet {
    fn identity() -> Self {
        let mut g = [[0.0; 3]; 3];
        for (i, row) in g.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self {
            g,
            dg: [[[0.0; 3]; 3]; 3],
            ddg: [[[[0.0; 3]; 3]; 3]; 3],
        }
    }

    pub fn inverse(&self) -> Result<Tensor2> {
        let m = Matrix3::from_fn(|i, j| self.g[i][j]);
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("metric tensor is singular".into()))?;
        Ok(std::array::from_fn(|i| {
            std::array::from_fn(|j| inv[(i, j)])
        }))
    }
}

/// A Riemannian metric on a 1- to 3-dimensional chart.
pub trait Metric: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Components with partials up to `order` (0, 1 or 2); higher entries are zero.
    fn jet(&self, p: &ChartPoint, order: usize) -> Result<MetricJet>;

    /// Whether the jet is assembled from attached partials only.
    fn is_analytic(&self) -> bool;

    fn tensor(&self, p: &ChartPoint) -> Result<Tensor2> {
        Ok(self.jet(p, 0)?.g)
    }

    fn inner(&self, p: &ChartPoint, u: &[f64; 3], v: &[f64; 3]) -> Result<f64> {
        let g = self.tensor(p)?;
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += g[i][j] * u[i] * v[j];
            }
        }
        Ok(acc)
    }
}

/// Diagonal metric with a single conformally weighted axis:
/// `e^{2q} dx_w^2 + sum of the other dx_i^2`.
#[derive(Debug, Clone)]
pub struct WarpedMetric {
    dim: usize,
    weighted_axis: usize,
    q: ScalarField,
}

/// `e^{2q(t,s)} dt^2 + ds^2 + dz^2`.
pub type ProductMetric3 = WarpedMetric;
/// `e^{2q} dt^2 + ds^2` or `ds^2 + e^{2q} dphi^2`.
pub type SurfaceMetric = WarpedMetric;

impl WarpedMetric {
    pub fn new(dim: usize, weighted_axis: usize, q: ScalarField) -> Result<Self> {
        if !(1..=3).contains(&dim) || weighted_axis >= dim {
            return Err(Error::InvalidArgument(format!(
                "weighted axis {weighted_axis} invalid for a {dim}-dimensional chart"
            )));
        }
        Ok(Self {
            dim,
            weighted_axis,
            q,
        })
    }

    /// The three-dimensional product layout with `t` (axis 0) weighted.
    pub fn product3(q: ScalarField) -> Self {
        Self {
            dim: 3,
            weighted_axis: 0,
            q,
        }
    }

    pub fn surface(q: ScalarField, weighted_axis: usize) -> Result<Self> {
        Self::new(2, weighted_axis, q)
    }

    pub fn flat(dim: usize) -> Self {
        Self {
            dim,
            weighted_axis: 0,
            q: ScalarField::constant(0.0),
        }
    }

    pub fn exponent(&self) -> &ScalarField {
        &self.q
    }

    pub fn weighted_axis(&self) -> usize {
        self.weighted_axis
    }
}

impl Metric for WarpedMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, p: &ChartPoint, order: usize) -> Result<MetricJet> {
        let mut jet = MetricJet::identity();
        let w = self.weighted_axis;
        let q = self.q.value(p)?;
        let e = (2.0 * q).exp();
        jet.g[w][w] = e;
        if order >= 1 {
            let mut dq = [0.0; 3];
            for (k, d) in dq.iter_mut().enumerate().take(self.dim) {
                *d = partial(&self.q, p, &[k])?;
                jet.dg[k][w][w] = 2.0 * *d * e;
            }
            if order >= 2 {
                for k in 0..self.dim {
                    for l in k..self.dim {
                        let qkl = partial(&self.q, p, &[k, l])?;
                        let v = (2.0 * qkl + 4.0 * dq[k] * dq[l]) * e;
                        jet.ddg[k][l][w][w] = v;
                        jet.ddg[l][k][w][w] = v;
                    }
                }
            }
        }
        Ok(jet)
    }

    fn is_analytic(&self) -> bool {
        self.q.analytic_order() >= 2
    }
}

/// General symmetric metric given by component fields, e.g. an induced metric.
#[derive(Debug, Clone)]
pub struct TensorMetric {
    dim: usize,
    // upper triangle, row-major: (0,0), (0,1), .., (1,1), ..
    comps: Vec<ScalarField>,
}

impl TensorMetric {
    /// `comps(i, j)` is queried for `i <= j`.
    pub fn new(dim: usize, comps: impl Fn(usize, usize) -> ScalarField) -> Self {
        let mut v = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                v.push(comps(i, j));
            }
        }
        Self { dim, comps: v }
    }

    pub fn component(&self, i: usize, j: usize) -> &ScalarField {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let offset: usize = (0..i).map(|r| self.dim - r).sum();
        &self.comps[offset + (j - i)]
    }
}

impl Metric for TensorMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, p: &ChartPoint, order: usize) -> Result<MetricJet> {
        let mut jet = MetricJet::identity();
        let n = self.dim;
        for i in 0..n {
            for j in i..n {
                let c = self.component(i, j);
                let v = c.value(p)?;
                jet.g[i][j] = v;
                jet.g[j][i] = v;
                if order >= 1 {
                    for k in 0..n {
                        let d = partial(c, p, &[k])?;
                        jet.dg[k][i][j] = d;
                        jet.dg[k][j][i] = d;
                        if order >= 2 {
                            for l in k..n {
                                let dd = partial(c, p, &[k, l])?;
                                for (a, b) in [(k, l), (l, k)] {
                                    jet.ddg[a][b][i][j] = dd;
                                    jet.ddg[a][b][j][i] = dd;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(jet)
    }

    fn is_analytic(&self) -> bool {
        self.comps.iter().all(|c| c.analytic_order() >= 2)
    }
}

/// Christoffel symbols `gamma[k][i][j] = Gamma^k_ij` and, when requested,
/// `dgamma[m][k][i][j] = d_m Gamma^k_ij`.
#[derive(Debug, Clone)]
pub struct Connection {
    pub gamma: Tensor3,
    pub dgamma: Option<Tensor4>,
}

fn connection_from_jet(jet: &MetricJet, with_derivatives: bool) -> Result<Connection> {
    let ginv = jet.inverse()?;
    // s[i][j][l] = d_i g_jl + d_j g_il - d_l g_ij
    let mut s = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for l in 0..3 {
                s[i][j][l] = jet.dg[i][j][l] + jet.dg[j][i][l] - jet.dg[l][i][j];
            }
        }
    }
    let mut gamma = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                gamma[k][i][j] = 0.5 * (0..3).map(|l| ginv[k][l] * s[i][j][l]).sum::<f64>();
            }
        }
    }
    if !with_derivatives {
        return Ok(Connection {
            gamma,
            dgamma: None,
        });
    }
    let mut dgamma = [[[[0.0; 3]; 3]; 3]; 3];
    for m in 0..3 {
        // d_m g^{kl} = -g^{ka} d_m g_ab g^{bl}
        let mut dginv = [[0.0; 3]; 3];
        for k in 0..3 {
            for l in 0..3 {
                let mut acc = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        acc -= ginv[k][a] * jet.dg[m][a][b] * ginv[b][l];
                    }
                }
                dginv[k][l] = acc;
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let mut ds = [0.0; 3];
                for (l, d) in ds.iter_mut().enumerate() {
                    *d = jet.ddg[m][i][j][l] + jet.ddg[m][j][i][l] - jet.ddg[m][l][i][j];
                }
                for k in 0..3 {
                    let mut acc = 0.0;
                    for l in 0..3 {
                        acc += dginv[k][l] * s[i][j][l] + ginv[k][l] * ds[l];
                    }
                    dgamma[m][k][i][j] = 0.5 * acc;
                }
            }
        }
    }
    Ok(Connection {
        gamma,
        dgamma: Some(dgamma),
    })
}

/// `Gamma^k_ij` of the Levi-Civita connection, indexed `[k][i][j]`.
pub fn christoffel_symbols(metric: &dyn Metric, p: &ChartPoint) -> Result<Tensor3> {
    Ok(connection_from_jet(&metric.jet(p, 1)?, false)?.gamma)
}

pub fn connection(
    metric: &dyn Metric,
    p: &ChartPoint,
    with_derivatives: bool,
) -> Result<Connection> {
    let order = if with_derivatives { 2 } else { 1 };
    connection_from_jet(&metric.jet(p, order)?, with_derivatives)
}

/// Chart components `R[i][j][k][l] = <R(d_i, d_j) d_k, d_l>` with
/// `R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]`.
pub fn riemann_chart(metric: &dyn Metric, p: &ChartPoint) -> Result<Tensor4> {
    let jet = metric.jet(p, 2)?;
    let conn = connection_from_jet(&jet, true)?;
    let (gm, dgm) = (
        &conn.gamma,
        conn.dgamma.as_ref().expect("derivatives requested"),
    );
    // up[l][i][j][k] = R^l_ijk
    let mut up = [[[[0.0; 3]; 3]; 3]; 3];
    for l in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let mut v = dgm[i][l][j][k] - dgm[j][l][i][k];
                    for m in 0..3 {
                        v += gm[l][i][m] * gm[m][j][k] - gm[l][j][m] * gm[m][i][k];
                    }
                    up[l][i][j][k] = v;
                }
            }
        }
    }
    let mut low = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    low[i][j][k][l] = (0..3).map(|m| up[m][i][j][k] * jet.g[m][l]).sum();
                }
            }
        }
    }
    Ok(low)
}

/// Chart Ricci tensor `Ric_jk = sum_i R^i_ijk`.
pub fn ricci_chart(metric: &dyn Metric, p: &ChartPoint) -> Result<Tensor2> {
    let low = riemann_chart(metric, p)?;
    let ginv = metric.jet(p, 0)?.inverse()?;
    let mut ric = [[0.0; 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            let mut acc = 0.0;
            for i in 0..3 {
                for l in 0..3 {
                    // <R(d_i, d_j) d_k, d_l> g^{li}
                    acc += low[i][j][k][l] * ginv[l][i];
                }
            }
            ric[j][k] = acc;
        }
    }
    Ok(ric)
}

/// Gauss curvature `-(q_uu + q_u^2)` of a two-dimensional warped metric, `u` the unit axis.
pub fn gauss_curvature_2d(metric: &SurfaceMetric, p: &ChartPoint) -> Result<f64> {
    if metric.dim() != 2 {
        return Err(Error::InvalidArgument(
            "gauss_curvature_2d needs a two-dimensional metric".into(),
        ));
    }
    let u = 1 - metric.weighted_axis();
    let f = partial(metric.exponent(), p, &[u])?;
    let fu = partial(metric.exponent(), p, &[u, u])?;
    Ok(-fu - f * f)
}

fn orthonormality_tolerance(metric: &dyn Metric) -> f64 {
    if metric.is_analytic() {
        1e-8
    } else {
        1e-6
    }
}

/// Checks `<e_i, e_j> = delta_ij` at `p`, returning the frame's chart components.
pub fn check_orthonormal(
    metric: &dyn Metric,
    frame: &FrameField,
    p: &ChartPoint,
) -> Result<Vec<[f64; 3]>> {
    let legs = frame.components_at(p)?;
    let g = metric.tensor(p)?;
    let tol = orthonormality_tolerance(metric);
    for i in 0..legs.len() {
        for j in i..legs.len() {
            let mut ip = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    ip += g[a][b] * legs[i][a] * legs[j][b];
                }
            }
            let dev = (ip - if i == j { 1.0 } else { 0.0 }).abs();
            if dev > tol {
                return Err(Error::NonOrthonormalFrame {
                    i: i + 1,
                    j: j + 1,
                    deviation: dev,
                });
            }
        }
    }
    Ok(legs)
}

fn contract4(low: &Tensor4, legs: &[[f64; 3]], (i, j, k, l): (usize, usize, usize, usize)) -> f64 {
    let (a, b, c, d) = (&legs[i], &legs[j], &legs[k], &legs[l]);
    let mut acc = 0.0;
    for p in 0..3 {
        if a[p] == 0.0 {
            continue;
        }
        for q in 0..3 {
            if b[q] == 0.0 {
                continue;
            }
            for r in 0..3 {
                if c[r] == 0.0 {
                    continue;
                }
                for s in 0..3 {
                    acc += a[p] * b[q] * c[r] * d[s] * low[p][q][r][s];
                }
            }
        }
    }
    acc
}

/// `<R(e_i, e_j) e_k, e_l>` in the frame, indices 1-based.
pub fn riemann_component(
    metric: &dyn Metric,
    p: &ChartPoint,
    frame: &FrameField,
    indices: (usize, usize, usize, usize),
) -> Result<f64> {
    let (i, j, k, l) = indices;
    let n = frame.len();
    if [i, j, k, l].iter().any(|&x| x == 0 || x > n) {
        return Err(Error::InvalidArgument(format!(
            "frame indices {indices:?} outside 1..={n}"
        )));
    }
    let legs = check_orthonormal(metric, frame, p)?;
    let low = riemann_chart(metric, p)?;
    Ok(contract4(&low, &legs, (i - 1, j - 1, k - 1, l - 1)))
}

/// All frame components of the curvature tensor at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureComponents {
    pub values: BTreeMap<(usize, usize, usize, usize), f64>,
}

impl CurvatureComponents {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.values.get(&(i, j, k, l)).copied().unwrap_or(0.0)
    }

    /// Largest violation of the antisymmetries and the pair symmetry.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (&(i, j, k, l), &v) in &self.values {
            worst = worst
                .max((v + self.get(j, i, k, l)).abs())
                .max((v + self.get(i, j, l, k)).abs())
                .max((v - self.get(k, l, i, j)).abs());
        }
        worst
    }

    /// Largest first-Bianchi sum `R(i,j,k,l) + R(j,k,i,l) + R(k,i,j,l)`.
    pub fn bianchi_defect(&self) -> f64 {
        let n = self.values.keys().map(|k| k.0).max().unwrap_or(0);
        let mut worst: f64 = 0.0;
        for i in 1..=n {
            for j in 1..=n {
                for k in 1..=n {
                    for l in 1..=n {
                        let s = self.get(i, j, k, l) + self.get(j, k, i, l) + self.get(k, i, j, l);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

pub fn curvature_components(
    metric: &dyn Metric,
    p: &ChartPoint,
    frame: &FrameField,
) -> Result<CurvatureComponents> {
    let legs = check_orthonormal(metric, frame, p)?;
    let low = riemann_chart(metric, p)?;
    let n = legs.len();
    let mut values = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    values.insert(
                        (i + 1, j + 1, k + 1, l + 1),
                        contract4(&low, &legs, (i, j, k, l)),
                    );
                }
            }
        }
    }
    Ok(CurvatureComponents { values })
}

/// Ricci tensor evaluated on chart vectors `u`, `v`.
pub fn ricci(metric: &dyn Metric, p: &ChartPoint, u: &[f64; 3], v: &[f64; 3]) -> Result<f64> {
    let ric = ricci_chart(metric, p)?;
    let (u, v) = (Vector3::from(*u), Vector3::from(*v));
    let m = Matrix3::from_fn(|i, j| ric[i][j]);
    Ok(u.dot(&(m * v)))
}

/// `sum_i e_i(e_i f) - (nabla_{e_i} e_i) f` over the legs of `frame`.
pub fn laplace_beltrami(frame: &FrameField, field: &ScalarField, p: &ChartPoint) -> Result<f64> {
    let metric = frame.metric();
    let legs = check_orthonormal(metric.as_ref(), frame, p)?;
    let gamma = christoffel_symbols(metric.as_ref(), p)?;
    let n = metric.dim();
    // weights w[a][b] = sum_i a_i^a a_i^b
    let mut w = [[0.0; 3]; 3];
    for leg in &legs {
        for a in 0..n {
            for b in 0..n {
                w[a][b] += leg[a] * leg[b];
            }
        }
    }
    let mut grad = [0.0; 3];
    for (c, g) in grad.iter_mut().enumerate().take(n) {
        *g = partial(field, p, &[c])?;
    }
    let mut acc = 0.0;
    for a in 0..n {
        for b in a..n {
            let wab = if a == b { w[a][a] } else { w[a][b] + w[b][a] };
            if wab.abs() < 1e-300 {
                continue;
            }
            let second = partial(field, p, &[a, b])?;
            let conn: f64 = (0..n).map(|c| gamma[c][a][b] * grad[c]).sum();
            acc += wab * (second - conn);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{semi_geodesic_frame, FrameField};
    use crate::numkernel::DerivativeMode;
    use proptest::prelude::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn sphere_q(r: f64) -> ScalarField {
        ScalarField::univariate(1, move |s| {
            let (sn, cs) = (s / r).sin_cos();
            let cot = cs / sn;
            let csc2 = 1.0 / (sn * sn);
            // ln(R sin(s/R)) and its derivatives
            [
                (r * sn).ln(),
                cot / r,
                -csc2 / (r * r),
                2.0 * csc2 * cot / (r * r * r),
            ]
        })
    }

    #[test]
    fn flat_christoffels_vanish() {
        let g =
            christoffel_symbols(&WarpedMetric::flat(3), &ChartPoint::xyz(0.2, 0.3, 0.4)).unwrap();
        assert!(g.iter().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn christoffels_of_exponential_warp() {
        let m = WarpedMetric::product3(ScalarField::coordinate(1));
        let s = 0.7;
        let g = christoffel_symbols(&m, &ChartPoint::xyz(0.0, s, 0.0)).unwrap();
        assert!((g[1][0][0] + (2.0 * s).exp()).abs() < 1e-12);
        assert!((g[0][0][1] - 1.0).abs() < 1e-12);
        assert!((g[0][1][0] - 1.0).abs() < 1e-12);
        assert_eq!(g[1][1][1], 0.0);
        assert_eq!(g[2][0][0], 0.0);
    }

    #[test]
    fn christoffels_of_sphere_chart() {
        // ds^2 + sin^2(s) dphi^2 with s on axis 0
        let q = ScalarField::univariate(0, |s| {
            let (sn, cs) = s.sin_cos();
            [sn.ln(), cs / sn, -1.0 / (sn * sn), 2.0 * cs / sn.powi(3)]
        });
        let m = WarpedMetric::surface(q, 1).unwrap();
        let g = christoffel_symbols(&m, &ChartPoint::xy(PI / 4.0, 0.0)).unwrap();
        assert!((g[0][1][1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn gauss_curvature_examples() {
        for r in [0.5, 1.0, 2.0] {
            let q = ScalarField::univariate(0, move |s| {
                let (sn, cs) = (s / r).sin_cos();
                [
                    (r * sn).ln(),
                    cs / sn / r,
                    -1.0 / (sn * sn * r * r),
                    2.0 * cs / (sn.powi(3) * r * r * r),
                ]
            });
            let m = WarpedMetric::surface(q, 1).unwrap();
            let k = gauss_curvature_2d(&m, &ChartPoint::xy(0.5 * r, 0.0)).unwrap();
            assert!((k - 1.0 / (r * r)).abs() < 1e-12);
        }
        let flat = WarpedMetric::flat(2);
        assert_eq!(
            gauss_curvature_2d(&flat, &ChartPoint::xy(0.1, 0.2)).unwrap(),
            0.0
        );
        let hyp = WarpedMetric::surface(ScalarField::coordinate(1), 0).unwrap();
        assert_eq!(
            gauss_curvature_2d(&hyp, &ChartPoint::xy(0.1, 0.2)).unwrap(),
            -1.0
        );
    }

    #[test]
    fn sphere_times_line_curvature() {
        let metric = Arc::new(WarpedMetric::product3(sphere_q(1.0)));
        let frame = semi_geodesic_frame(metric.clone());
        let p = ChartPoint::xyz(0.3, 1.1, 0.0);
        let k = riemann_component(metric.as_ref(), &p, &frame, (1, 2, 2, 1)).unwrap();
        assert!((k - 1.0).abs() < 1e-10);
        let comps = curvature_components(metric.as_ref(), &p, &frame).unwrap();
        for (&(i, j, k, l), &v) in &comps.values {
            if [i, j, k, l].contains(&3) {
                assert!(v.abs() < 1e-12);
            }
        }
        assert!(comps.symmetry_defect() < 1e-8);

        let flat = Arc::new(WarpedMetric::flat(3));
        let fr = semi_geodesic_frame(flat.clone());
        let c = curvature_components(flat.as_ref(), &p, &fr).unwrap();
        assert!(c.values.values().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_non_orthonormal_frame() {
        let metric: Arc<dyn Metric> = Arc::new(WarpedMetric::flat(3));
        let c = |v: f64| ScalarField::constant(v);
        let frame = FrameField::new(
            vec![
                vec![c(2.0), c(0.0), c(0.0)],
                vec![c(0.0), c(1.0), c(0.0)],
                vec![c(0.0), c(0.0), c(1.0)],
            ],
            metric.clone(),
        )
        .unwrap();
        let err = riemann_component(
            metric.as_ref(),
            &ChartPoint::xyz(0.0, 0.0, 0.0),
            &frame,
            (1, 2, 2, 1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonOrthonormalFrame { i: 1, j: 1, .. }));
    }

    #[test]
    fn laplacian_examples() {
        let flat = Arc::new(WarpedMetric::flat(3));
        let frame = semi_geodesic_frame(flat);
        let s2 = ScalarField::new(|p| p.coord(1) * p.coord(1));
        let v = laplace_beltrami(&frame, &s2, &ChartPoint::xyz(0.1, 0.4, 0.2)).unwrap();
        assert!((v - 2.0).abs() < 1e-6);

        // constants are harmonic in the hyperbolic product
        let hyp = Arc::new(WarpedMetric::product3(ScalarField::coordinate(1)));
        let frame = semi_geodesic_frame(hyp.clone());
        let v = laplace_beltrami(
            &frame,
            &ScalarField::constant(-0.7),
            &ChartPoint::xyz(0.1, 0.4, 0.2),
        )
        .unwrap();
        assert_eq!(v, 0.0);

        // p_y for p = 2 ln cosh y on e^{2p}dx^2 + dy^2 + dz^2
        let p = ScalarField::univariate(1, |y| {
            let t = y.tanh();
            let sech2 = 1.0 - t * t;
            [2.0 * y.cosh().ln(), 2.0 * t, 2.0 * sech2, -4.0 * t * sech2]
        });
        let py = p.partial_field(1);
        let m = Arc::new(WarpedMetric::product3(p));
        let frame = semi_geodesic_frame(m);
        for y in [-1.0, 0.0, 0.8] {
            let v = laplace_beltrami(&frame, &py, &ChartPoint::xyz(0.5, y, 0.5)).unwrap();
            assert!(v.abs() < 1e-10, "{v}");
        }
    }

    fn random_q(a: f64, b: f64, c: f64) -> ScalarField {
        let t = ScalarField::coordinate(0);
        let s = ScalarField::coordinate(1);
        t.mul(&s)
            .scaled(a)
            .sin()
            .scaled(0.3)
            .sum(&s.square().scaled(b))
            .sum(&t.scaled(c))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gauss_matches_frame_curvature(a in -1.0f64..1.0, b in -0.5f64..0.5, c in -0.5f64..0.5,
                                         t in -1.0f64..1.0, s in -1.0f64..1.0) {
            let q = random_q(a, b, c);
            let m2 = WarpedMetric::surface(q.clone(), 0).unwrap();
            let m3 = Arc::new(WarpedMetric::product3(q));
            let frame = semi_geodesic_frame(m3.clone());
            let p = ChartPoint::xyz(t, s, 0.0);
            let k2 = gauss_curvature_2d(&m2, &ChartPoint::xy(t, s)).unwrap();
            let k3 = riemann_component(m3.as_ref(), &p, &frame, (1, 2, 2, 1)).unwrap();
            prop_assert!((k2 - k3).abs() < 1e-6);
            let comps = curvature_components(m3.as_ref(), &p, &frame).unwrap();
            prop_assert!(comps.bianchi_defect() < 1e-6);
            prop_assert!(comps.symmetry_defect() < 1e-8);
        }

        #[test]
        fn laplacian_is_frame_independent(a in -1.0f64..1.0, b in -0.5f64..0.5, th in -3.0f64..3.0,
                                          t in -1.0f64..1.0, s in -1.0f64..1.0) {
            let q = random_q(a, b, 0.2);
            let m3 = Arc::new(WarpedMetric::product3(q.clone()));
            let e = semi_geodesic_frame(m3.clone());
            // rotate the horizontal legs by a constant angle
            let (sn, cs) = th.sin_cos();
            let emq = q.exp_scaled(-1.0);
            let zero = ScalarField::constant(0.0);
            let rotated = FrameField::new(vec![
                vec![emq.scaled(cs), ScalarField::constant(sn), zero.clone()],
                vec![emq.scaled(-sn), ScalarField::constant(cs), zero.clone()],
                vec![zero.clone(), zero.clone(), ScalarField::constant(1.0)],
            ], m3).unwrap();
            let f = ScalarField::new(|p| (p.coord(0) + 2.0 * p.coord(1)).sin() * p.coord(2).cos());
            let p = ChartPoint::xyz(t, s, 0.3);
            let l1 = laplace_beltrami(&e, &f, &p).unwrap();
            let l2 = laplace_beltrami(&rotated, &f, &p).unwrap();
            prop_assert!((l1 - l2).abs() < 1e-6);
        }
    }

    #[test]
    fn fd_mode_metric_is_not_analytic() {
        let m = WarpedMetric::product3(sphere_q(1.0).in_mode(DerivativeMode::Fd));
        assert!(!m.is_analytic());
        let m = WarpedMetric::product3(sphere_q(1.0));
        assert!(m.is_analytic());
    }
}
