//! Orthonormal frames on product charts, the adapted frame of a submersion with
//! one-dimensional fibers, and its integrability data.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    check_orthonormal, christoffel_symbols, curvature_components, Metric, ProductMetric3,
};
use crate::numkernel::{
    frame_derivative, frame_derivative_field, partial, sample_grid, ChartBox, ChartPoint,
    DerivativeMode, ScalarField, Univariate,
};
use crate::report::{sweep, ResidualReport};

/// Vector fields given by chart components, together with the metric they are
/// orthonormal for.
#[derive(Debug, Clone)]
pub struct FrameField {
    legs: Vec<Vec<ScalarField>>,
    metric: Arc<dyn Metric>,
    base_curvature: Option<ScalarField>,
}
/// Leg components and their chart gradients at a point.
type LegJets = (Vec<[f64; 3]>, Vec<[[f64; 3]; 3]>);

impl FrameField {
    pub fn new(legs: Vec<Vec<ScalarField>>, metric: Arc<dyn Metric>) -> Result<Self> {
        let n = metric.dim();
        if legs.is_empty() || legs.len() > n || legs.iter().any(|l| l.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "frame legs must have {n} components each"
            )));
        }
        Ok(Self {
            legs,
            metric,
            base_curvature: None,
        })
    }

    /// Attaches the Gauss curvature of the surface factor of a product chart.
    pub fn with_base_curvature(mut self, k: ScalarField) -> Self {
        self.base_curvature = Some(k);
        self
    }

    pub fn base_curvature(&self) -> Option<&ScalarField> {
        self.base_curvature.as_ref()
    }

    pub fn len(&self) -> usize {
        self.legs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.legs.is_empty()
    }

    pub fn metric(&self) -> &Arc<dyn Metric> {
        &self.metric
    }

    /// Chart components of leg `i` (0-based).
    pub fn leg(&self, i: usize) -> &[ScalarField] {
        &self.legs[i]
    }

    pub fn components_at(&self, p: &ChartPoint) -> Result<Vec<[f64; 3]>> {
        self.legs
            .iter()
            .map(|leg| {
                let mut v = [0.0; 3];
                for (a, c) in leg.iter().enumerate() {
                    v[a] = c.value(p)?;
                }
                Ok(v)
            })
            .collect()
    }

    /// `e_i(f)` at `p`, leg index 0-based.
    pub fn apply(&self, i: usize, field: &ScalarField, p: &ChartPoint) -> Result<f64> {
        frame_derivative(&self.legs[i], field, &p.embedded(self.metric.dim()))
    }

    /// `e_i(f)` as a field.
    pub fn apply_field(&self, i: usize, field: &ScalarField) -> ScalarField {
        frame_derivative_field(&self.legs[i], field)
    }

    fn leg_jets(&self, p: &ChartPoint) -> Result<LegJets> {
        let vals = self.components_at(p)?;
        let mut ders = Vec::with_capacity(self.legs.len());
        for leg in &self.legs {
            // d[a][b] = d_a (leg^b)
            let mut d = [[0.0; 3]; 3];
            for (b, c) in leg.iter().enumerate() {
                for (a, row) in d.iter_mut().enumerate().take(leg.len()) {
                    row[b] = partial(c, p, &[a])?;
                }
            }
            ders.push(d);
        }
        Ok((vals, ders))
    }

    fn coefficients(&self, p: &ChartPoint, v: &[f64; 3], legs: &[[f64; 3]]) -> Result<Vec<f64>> {
        legs.iter().map(|l| self.metric.inner(p, v, l)).collect()
    }

    /// `c[i][j][k] = <nabla_{e_i} e_j, e_k>` from the chart Christoffel symbols.
    pub fn connection_coefficients(&self, p: &ChartPoint) -> Result<Vec<Vec<Vec<f64>>>> {
        let (vals, ders) = self.leg_jets(p)?;
        let gamma = christoffel_symbols(self.metric.as_ref(), p)?;
        let n = self.legs.len();
        let mut out = vec![vec![Vec::new(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut v = [0.0; 3];
                for (b, vb) in v.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for a in 0..3 {
                        acc += vals[i][a] * ders[j][a][b];
                        for c in 0..3 {
                            acc += gamma[b][a][c] * vals[i][a] * vals[j][c];
                        }
                    }
                    *vb = acc;
                }
                out[i][j] = self.coefficients(p, &v, &vals)?;
            }
        }
        Ok(out)
    }

    /// `c[i][j][k] = <[e_i, e_j], e_k>` from differences of directional derivatives.
    pub fn bracket_coefficients(&self, p: &ChartPoint) -> Result<Vec<Vec<Vec<f64>>>> {
        let (vals, ders) = self.leg_jets(p)?;
        let n = self.legs.len();
        let mut out = vec![vec![Vec::new(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut v = [0.0; 3];
                for (b, vb) in v.iter_mut().enumerate() {
                    *vb = (0..3)
                        .map(|a| vals[i][a] * ders[j][a][b] - vals[j][a] * ders[i][a][b])
                        .sum();
                }
                out[i][j] = self.coefficients(p, &v, &vals)?;
            }
        }
        Ok(out)
    }
}

fn unit(dim: usize, axis: usize) -> Vec<ScalarField> {
    (0..dim)
        .map(|a| ScalarField::constant(if a == axis { 1.0 } else { 0.0 }))
        .collect()
}

/// Gauss curvature field `-(q_ss + q_s^2)` of the surface factor of a product metric.
pub fn product_base_curvature(metric: &ProductMetric3) -> ScalarField {
    let f = metric.exponent().partial_field(1);
    f.partial_field(1).sum(&f.square()).neg()
}

/// `{e^{-q} d_w, remaining coordinate fields}` for a warped metric.
pub fn semi_geodesic_frame(metric: Arc<ProductMetric3>) -> FrameField {
    let dim = metric.dim();
    let w = metric.weighted_axis();
    let mut first = unit(dim, w);
    first[w] = metric.exponent().exp_scaled(-1.0);
    let mut legs = vec![first];
    legs.extend((0..dim).filter(|&a| a != w).map(|a| unit(dim, a)));
    let k = (dim == 3 && w == 0).then(|| product_base_curvature(&metric));
    let mut frame = FrameField::new(legs, metric).expect("semi-geodesic legs match the chart");
    if let Some(k) = k {
        frame = frame.with_base_curvature(k);
    }
    frame
}

/// The two angles that determine an adapted frame.
#[derive(Debug, Clone)]
pub struct AdaptedFrameSpec {
    pub theta: ScalarField,
    pub alpha: ScalarField,
}

impl AdaptedFrameSpec {
    pub fn new(theta: ScalarField, alpha: ScalarField) -> Self {
        Self { theta, alpha }
    }

    pub fn constant(theta: f64, alpha: f64) -> Self {
        Self::new(ScalarField::constant(theta), ScalarField::constant(alpha))
    }

    /// Rows `a_i = (a_i^1, a_i^2, a_i^3)` against the semi-geodesic frame.
    pub fn coefficients(&self, p: &ChartPoint) -> Result<[[f64; 3]; 3]> {
        let (st, ct) = self.theta.value(p)?.sin_cos();
        let (sa, ca) = self.alpha.value(p)?.sin_cos();
        Ok([
            [ct, st, 0.0],
            [-ca * st, ca * ct, sa],
            [sa * st, -sa * ct, ca],
        ])
    }

    /// Rejects specs whose fiber angle takes both signs on `points`.
    pub fn check_alpha_sign(&self, points: &[ChartPoint]) -> Result<()> {
        let mut pos = false;
        let mut neg = false;
        for p in points {
            let a = self.alpha.value(p)?;
            pos |= a > 0.0;
            neg |= a < 0.0;
        }
        if pos && neg {
            Err(Error::AngleCrossesZero)
        } else {
            Ok(())
        }
    }
}

/// `e_1, e_2, e_3` built from the angles against `E_1 = e^{-q} d_t, E_2 = d_s, E_3 = d_z`.
pub fn adapted_frame(spec: &AdaptedFrameSpec, metric: Arc<ProductMetric3>) -> Result<FrameField> {
    if metric.dim() != 3 || metric.weighted_axis() != 0 {
        return Err(Error::InvalidArgument(
            "adapted frames live on e^{2q}dt^2 + ds^2 + dz^2".into(),
        ));
    }
    let emq = metric.exponent().exp_scaled(-1.0);
    let (st, ct) = (spec.theta.sin(), spec.theta.cos());
    let (sa, ca) = (spec.alpha.sin(), spec.alpha.cos());
    let zero = ScalarField::constant(0.0);
    let legs = vec![
        vec![ct.mul(&emq), st.clone(), zero],
        vec![ca.mul(&st).mul(&emq).neg(), ca.mul(&ct), sa.clone()],
        vec![sa.mul(&st).mul(&emq), sa.mul(&ct).neg(), ca],
    ];
    let k = product_base_curvature(&metric);
    Ok(FrameField::new(legs, metric)?.with_base_curvature(k))
}

/// `f_1, f_2, f_3, sigma, kappa_1, kappa_2` of an adapted frame, plus the auxiliary `fbar`.
#[derive(Debug, Clone)]
pub struct IntegrabilityData {
    pub f1: ScalarField,
    pub f2: ScalarField,
    pub f3: ScalarField,
    pub sigma: ScalarField,
    pub kappa1: ScalarField,
    pub kappa2: ScalarField,
    pub fbar: ScalarField,
}

impl IntegrabilityData {
    pub const NAMES: [&'static str; 6] = ["f1", "f2", "f3", "sigma", "kappa1", "kappa2"];

    pub fn get(&self, name: &str) -> Option<&ScalarField> {
        match name {
            "f1" => Some(&self.f1),
            "f2" => Some(&self.f2),
            "f3" => Some(&self.f3),
            "sigma" => Some(&self.sigma),
            "kappa1" => Some(&self.kappa1),
            "kappa2" => Some(&self.kappa2),
            "fbar" => Some(&self.fbar),
            _ => None,
        }
    }

    /// Copy with one function multiplied by `factor`.
    pub fn mutated(&self, name: &str, factor: f64) -> Result<Self> {
        let mut out = self.clone();
        let slot = match name {
            "f1" => &mut out.f1,
            "f2" => &mut out.f2,
            "f3" => &mut out.f3,
            "sigma" => &mut out.sigma,
            "kappa1" => &mut out.kappa1,
            "kappa2" => &mut out.kappa2,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown integrability function `{other}`"
                )))
            }
        };
        *slot = slot.scaled(factor);
        Ok(out)
    }
}

/// Closed-form integrability data of the adapted frame.
pub fn integrability_data(spec: &AdaptedFrameSpec, metric: &ProductMetric3) -> IntegrabilityData {
    let q = metric.exponent();
    let emq = q.exp_scaled(-1.0);
    let (th, al) = (&spec.theta, &spec.alpha);
    let (st, ct) = (th.sin(), th.cos());
    let (sa, ca) = (al.sin(), al.cos());
    let f = q.partial_field(1);
    let e1th = emq.mul(&th.partial_field(0));
    let e2th = th.partial_field(1);
    let e3th = th.partial_field(2);
    let fbar = st.mul(&e1th).neg().sum(&ct.mul(&e2th)).sum(&f.mul(&st));
    let sc = sa.mul(&ca);
    let f2 = fbar.mul(&ca.square()).neg().sub(&sc.mul(&e3th));
    let sigma = fbar.mul(&sc).neg().sub(&sa.square().mul(&e3th));
    let kappa1 = fbar.mul(&sa.square()).neg().sum(&sc.mul(&e3th));
    let e3 = [sa.mul(&st).mul(&emq), sa.mul(&ct).neg(), ca.clone()];
    let kappa2 = frame_derivative_field(&e3, al).neg();
    IntegrabilityData {
        f1: ScalarField::constant(0.0),
        f2,
        f3: e3th.neg(),
        sigma,
        kappa1,
        kappa2,
        fbar,
    }
}

/// An adapted frame bundled with its inputs and data.
#[derive(Debug, Clone)]
pub struct AdaptedFrame {
    pub spec: AdaptedFrameSpec,
    pub metric: Arc<ProductMetric3>,
    pub frame: FrameField,
    pub data: IntegrabilityData,
}

impl AdaptedFrame {
    pub fn new(spec: AdaptedFrameSpec, metric: Arc<ProductMetric3>) -> Result<Self> {
        let frame = adapted_frame(&spec, metric.clone())?;
        let data = integrability_data(&spec, &metric);
        Ok(Self {
            spec,
            metric,
            frame,
            data,
        })
    }

    /// Identity suite after the fiber-angle sign check.
    pub fn validate(&self, points: &[ChartPoint], tol: f64) -> Result<ResidualReport> {
        self.spec.check_alpha_sign(points)?;
        validate_frame(&self.frame, &self.data, points, tol)
    }
}

/// Expected `<nabla_{e_i} e_j, e_k>` from the integrability data, `[i][j][k]`.
fn expected_connection(d: [f64; 6]) -> [[[f64; 3]; 3]; 3] {
    let [f1, f2, f3, s, k1, k2] = d;
    [
        [[0.0, -f1, 0.0], [f1, 0.0, -s], [0.0, s, 0.0]],
        [[0.0, -f2, s], [f2, 0.0, 0.0], [-s, 0.0, 0.0]],
        [[0.0, s - f3, -k1], [-(s - f3), 0.0, -k2], [k1, k2, 0.0]],
    ]
}

pub const CONNECTION_CHANNELS: [&str; 12] = [
    "connection nabla_e1 e1",
    "connection nabla_e1 e2",
    "connection nabla_e1 e3",
    "connection nabla_e2 e1",
    "connection nabla_e2 e2",
    "connection nabla_e2 e3",
    "connection nabla_e3 e1",
    "connection nabla_e3 e2",
    "connection nabla_e3 e3",
    "connection [e1,e3]",
    "connection [e2,e3]",
    "connection [e1,e2]",
];

pub const CURVATURE_CHANNELS: [&str; 7] = [
    "curvature R(e1,e3,e1,e2)",
    "curvature R(e1,e3,e1,e3)",
    "curvature R(e1,e3,e2,e3)",
    "curvature R(e1,e2,e1,e2)",
    "curvature R(e1,e2,e2,e3)",
    "curvature R(e2,e3,e1,e3)",
    "curvature R(e2,e3,e2,e3)",
];

/// Residuals of every connection, bracket and curvature identity at one point.
pub fn frame_identity_residuals(
    frame: &FrameField,
    data: &IntegrabilityData,
    p: &ChartPoint,
) -> Result<Vec<f64>> {
    if frame.len() != 3 {
        return Err(Error::InvalidArgument(
            "identity suite needs a 3-leg frame".into(),
        ));
    }
    let k_base = frame.base_curvature().ok_or_else(|| {
        Error::InvalidArgument("frame carries no surface-factor curvature".into())
    })?;
    let legs = check_orthonormal(frame.metric().as_ref(), frame, p)?;
    let d = [
        data.f1.value(p)?,
        data.f2.value(p)?,
        data.f3.value(p)?,
        data.sigma.value(p)?,
        data.kappa1.value(p)?,
        data.kappa2.value(p)?,
    ];
    let [f1, f2, f3, s, k1, k2] = d;
    let mut out = Vec::with_capacity(19);

    let conn = frame.connection_coefficients(p)?;
    let exp = expected_connection(d);
    for i in 0..3 {
        for j in 0..3 {
            let dev = (0..3)
                .map(|k| (conn[i][j][k] - exp[i][j][k]).abs())
                .fold(0.0, f64::max);
            out.push(dev);
        }
    }
    let br = frame.bracket_coefficients(p)?;
    let bracket_exp = [
        ((0, 2), [0.0, f3, k1]),
        ((1, 2), [-f3, 0.0, k2]),
        ((0, 1), [f1, f2, -2.0 * s]),
    ];
    for ((i, j), e) in bracket_exp {
        let dev = (0..3)
            .map(|k| (br[i][j][k] - e[k]).abs())
            .fold(0.0, f64::max);
        out.push(dev);
    }

    let curv = curvature_components(frame.metric().as_ref(), p, frame)?;
    // R(a,b,c,d) in the identities below means <R(e_a,e_b)e_d, e_c>
    let r = |a: usize, b: usize, c: usize, dd: usize| curv.get(a, b, dd, c);
    let e = |i: usize, f: &ScalarField| frame.apply(i, f, p);
    let kk = k_base.value(p)?;
    let (a13, a23, a33) = (legs[0][2], legs[1][2], legs[2][2]);
    let rows = [
        (
            r(1, 3, 1, 2),
            -e(0, &data.sigma)? + 2.0 * k1 * s,
            -a23 * a33 * kk,
        ),
        (
            r(1, 3, 1, 3),
            e(0, &data.kappa1)? + s * s - k1 * k1 + k2 * f1,
            a23 * a23 * kk,
        ),
        (
            r(1, 3, 2, 3),
            e(0, &data.kappa2)? - e(2, &data.sigma)? - k1 * f1 - k1 * k2,
            -a13 * a23 * kk,
        ),
        (
            r(1, 2, 1, 2),
            e(0, &data.f2)? + e(1, &data.f1)? - f1 * f1 - f2 * f2 + 2.0 * f3 * s - 3.0 * s * s,
            a33 * a33 * kk,
        ),
        (
            r(1, 2, 2, 3),
            -e(1, &data.sigma)? + 2.0 * k2 * s,
            a13 * a33 * kk,
        ),
        (
            r(2, 3, 1, 3),
            e(1, &data.kappa1)? + e(2, &data.sigma)? + k2 * f2 - k1 * k2,
            -a13 * a23 * kk,
        ),
        (
            r(2, 3, 2, 3),
            s * s + e(1, &data.kappa2)? - k1 * f2 - k2 * k2,
            a13 * a13 * kk,
        ),
    ];
    for (lhs, from_data, closed) in rows {
        out.push((lhs - from_data).abs().max((lhs - closed).abs()));
    }
    Ok(out)
}

/// Runs the identity suite and returns the report whatever the verdict.
pub fn frame_identity_report(
    label: &str,
    frame: &FrameField,
    data: &IntegrabilityData,
    points: &[ChartPoint],
    tol: f64,
) -> Result<ResidualReport> {
    let names: Vec<&str> = CONNECTION_CHANNELS
        .iter()
        .chain(CURVATURE_CHANNELS.iter())
        .copied()
        .collect();
    sweep(label, points, tol, &names, |p| {
        frame_identity_residuals(frame, data, p)
    })
}

/// Identity suite; a failing identity becomes [`Error::ToleranceExceeded`].
pub fn validate_frame(
    frame: &FrameField,
    data: &IntegrabilityData,
    points: &[ChartPoint],
    tol: f64,
) -> Result<ResidualReport> {
    frame_identity_report("frame identities", frame, data, points, tol)?.into_result()
}

/// Families of `(q, theta, alpha)` for which `e_3` spans the fibers of a genuine
/// Riemannian submersion, so that the identity suite applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmersionFamily {
    /// Arbitrary `q(t,s)`, `theta = alpha = pi/2`: projection along `E_1`.
    Twisted,
    /// Flat factor, radial `theta` around a centre, `alpha = pi/2`: circles as fibers.
    Radial,
    /// `q = g(s) + h(t)`, `theta = pi/2`, `alpha = atan(C e^{g})`.
    Warped,
    /// Arbitrary `q`, `alpha = 0`: projection onto the surface factor.
    Vertical,
}

impl SubmersionFamily {
    pub const ALL: [SubmersionFamily; 4] = [
        SubmersionFamily::Twisted,
        SubmersionFamily::Radial,
        SubmersionFamily::Warped,
        SubmersionFamily::Vertical,
    ];
}

/// A randomly drawn member of a [`SubmersionFamily`] on `[0,1] x [0.2,1.2] x [0,1]`.
#[derive(Debug, Clone)]
pub struct RandomFrameCase {
    pub label: String,
    pub family: SubmersionFamily,
    pub q: ScalarField,
    pub spec: AdaptedFrameSpec,
    pub domain: ChartBox,
}

impl RandomFrameCase {
    /// The case's adapted frame with partials kept (analytic) or dropped (fd).
    pub fn adapted(&self, mode: DerivativeMode) -> Result<AdaptedFrame> {
        let spec = AdaptedFrameSpec::new(
            self.spec.theta.clone().in_mode(mode),
            self.spec.alpha.clone().in_mode(mode),
        );
        AdaptedFrame::new(
            spec,
            Arc::new(ProductMetric3::product3(self.q.clone().in_mode(mode))),
        )
    }

    /// `n^3` grid over the guarded domain.
    pub fn grid(&self, n: usize) -> Result<Vec<ChartPoint>> {
        sample_grid(&self.domain, &[n, n, n])
    }
}

fn atan_fn() -> Univariate {
    Arc::new(|x: f64| {
        let d = 1.0 + x * x;
        [
            x.atan(),
            1.0 / d,
            -2.0 * x / (d * d),
            (6.0 * x * x - 2.0) / (d * d * d),
        ]
    })
}

fn reciprocal() -> Univariate {
    Arc::new(|x: f64| {
        let r = 1.0 / x;
        [r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]
    })
}

/// Smooth random function of `s` with three attached derivatives.
fn random_profile(rng: &mut impl Rng) -> ScalarField {
    let s = ScalarField::coordinate(1);
    let (a, b, c, w) = (
        rng.gen_range(-0.6..0.6),
        rng.gen_range(-0.4..0.4),
        rng.gen_range(-0.6..0.6),
        rng.gen_range(0.5..2.0),
    );
    s.scaled(w)
        .sin()
        .scaled(a)
        .sum(&s.square().scaled(b))
        .sum(&s.scaled(c))
}

pub fn random_frame_case(
    family: SubmersionFamily,
    index: usize,
    rng: &mut impl Rng,
) -> RandomFrameCase {
    let t = ScalarField::coordinate(0);
    let s = ScalarField::coordinate(1);
    let domain = ChartBox::new(&[0.0, 0.2, 0.0], &[1.0, 1.2, 1.0], 0.05).expect("static box");
    let right = ScalarField::constant(FRAC_PI_2);
    let (q, spec) = match family {
        SubmersionFamily::Twisted => {
            let (a, b) = (rng.gen_range(-0.8..0.8), rng.gen_range(0.5..1.5));
            let q = t
                .mul(&s)
                .scaled(b)
                .sin()
                .scaled(a)
                .sum(&random_profile(rng));
            (q, AdaptedFrameSpec::new(right.clone(), right))
        }
        SubmersionFamily::Radial => {
            let t0 = rng.gen_range(-1.5..-0.5);
            let s0 = rng.gen_range(-0.5..0.5);
            // t - t0 > 0 on the box, so atan of the slope is the polar angle
            let ratio = s
                .sum(&ScalarField::constant(-s0))
                .mul(&t.sum(&ScalarField::constant(-t0)).compose(reciprocal()));
            (
                ScalarField::constant(0.0),
                AdaptedFrameSpec::new(ratio.compose(atan_fn()), right),
            )
        }
        SubmersionFamily::Warped => {
            let g = random_profile(rng);
            let h = t.scaled(rng.gen_range(-0.5..0.5));
            let c = rng.gen_range(0.3..3.0);
            let alpha = g.exp_scaled(1.0).scaled(c).compose(atan_fn());
            (g.sum(&h), AdaptedFrameSpec::new(right, alpha))
        }
        SubmersionFamily::Vertical => {
            let a = rng.gen_range(-0.8..0.8);
            let q = t.mul(&s).sin().scaled(a).sum(&random_profile(rng));
            (q, AdaptedFrameSpec::new(right, ScalarField::constant(0.0)))
        }
    };
    RandomFrameCase {
        label: format!("{family:?}#{index}"),
        family,
        q: q.with_domain(domain),
        spec,
        domain,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{sample_grid, DerivativeMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn legs_at(frame: &FrameField, p: &ChartPoint) -> Vec<[f64; 3]> {
        frame.components_at(p).unwrap()
    }

    fn close(a: &[[f64; 3]], b: &[[f64; 3]], tol: f64) -> bool {
        a.iter()
            .zip(b)
            .all(|(x, y)| x.iter().zip(y).all(|(u, v)| (u - v).abs() < tol))
    }

    #[test]
    fn semi_geodesic_examples() {
        let p = ChartPoint::xyz(0.2, PI / 2.0, 0.1);
        let flat = semi_geodesic_frame(Arc::new(ProductMetric3::flat(3)));
        assert!(close(
            &legs_at(&flat, &p),
            &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            1e-15
        ));

        let q = ScalarField::univariate(1, |s| {
            let (sn, cs) = s.sin_cos();
            [sn.ln(), cs / sn, -1.0 / (sn * sn), 2.0 * cs / sn.powi(3)]
        });
        let frame = semi_geodesic_frame(Arc::new(ProductMetric3::product3(q)));
        // [E1, E2] = f E1 with f = cot s
        for s in [PI / 2.0, 0.9] {
            let p = ChartPoint::xyz(0.2, s, 0.1);
            let br = frame.bracket_coefficients(&p).unwrap();
            assert!((br[0][1][0] - s.cos() / s.sin()).abs() < 1e-12);
            assert!(br[0][1][1].abs() < 1e-12 && br[0][1][2].abs() < 1e-12);
            let conn = frame.connection_coefficients(&p).unwrap();
            assert!(conn[2].iter().flatten().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn adapted_frame_substitutions() {
        let m = Arc::new(ProductMetric3::flat(3));
        let p = ChartPoint::xyz(0.1, 0.2, 0.3);
        let f = adapted_frame(&AdaptedFrameSpec::constant(PI / 2.0, 0.0), m.clone()).unwrap();
        assert!(close(
            &legs_at(&f, &p),
            &[[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            1e-15
        ));
        let f = adapted_frame(&AdaptedFrameSpec::constant(PI / 2.0, PI / 2.0), m).unwrap();
        assert!(close(
            &legs_at(&f, &p),
            &[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
            1e-15
        ));
    }

    #[test]
    fn integrability_closed_forms() {
        // f = 1, theta = pi/2, alpha = pi/3
        let m = ProductMetric3::product3(ScalarField::coordinate(1));
        let d = integrability_data(&AdaptedFrameSpec::constant(PI / 2.0, PI / 3.0), &m);
        let p = ChartPoint::xyz(0.3, 0.4, 0.5);
        let v = |f: &ScalarField| f.value(&p).unwrap();
        assert!((v(&d.fbar) - 1.0).abs() < 1e-15);
        assert!((v(&d.kappa1) + 0.75).abs() < 1e-15);
        assert!((v(&d.f2) + 0.25).abs() < 1e-15);
        assert!((v(&d.sigma) + 3f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(v(&d.kappa2), 0.0);

        let flat = ProductMetric3::flat(3);
        let d = integrability_data(&AdaptedFrameSpec::constant(PI / 2.0, 0.7), &flat);
        for name in IntegrabilityData::NAMES {
            assert_eq!(v(d.get(name).unwrap()).abs(), 0.0, "{name}");
        }

        let d = integrability_data(&AdaptedFrameSpec::constant(PI / 2.0, PI / 2.0), &m);
        assert!((v(&d.kappa1) + v(&d.fbar)).abs() < 1e-15);
        for f in [&d.f2, &d.sigma, &d.kappa2] {
            assert!(v(f).abs() < 1e-15);
        }
    }

    #[test]
    fn flat_trivial_frame_passes() {
        let m = Arc::new(ProductMetric3::flat(3));
        let af = AdaptedFrame::new(AdaptedFrameSpec::constant(PI / 2.0, 0.0), m).unwrap();
        let bx = ChartBox::new(&[0.0; 3], &[1.0; 3], 0.1).unwrap();
        let pts = sample_grid(&bx, &[3, 3, 3]).unwrap();
        let r = af.validate(&pts, 1e-12).unwrap();
        assert!(r.channels.iter().all(|c| c.max_abs == 0.0));
    }

    #[test]
    fn constant_angle_hyperbolic_frame_is_not_a_submersion_frame() {
        // A constant fiber angle on H^2 x R does not make e_3 the fiber direction of a
        // submersion, so the connection table cannot hold.
        let m = Arc::new(ProductMetric3::product3(ScalarField::coordinate(1)));
        let af = AdaptedFrame::new(AdaptedFrameSpec::constant(PI / 2.0, PI / 3.0), m).unwrap();
        let pts = [ChartPoint::xyz(0.5, 0.5, 0.5)];
        let report = frame_identity_report("h", &af.frame, &af.data, &pts, 1e-6).unwrap();
        assert!(!report.passed());
        assert!(report.max_abs("connection nabla_e1 e2") > 0.4);
        assert!(matches!(
            af.validate(&pts, 1e-6),
            Err(Error::ToleranceExceeded { .. })
        ));
    }

    #[test]
    fn alpha_sign_crossing_is_rejected() {
        let spec =
            AdaptedFrameSpec::new(ScalarField::constant(PI / 2.0), ScalarField::coordinate(1));
        let pts = [
            ChartPoint::xyz(0.0, -0.1, 0.0),
            ChartPoint::xyz(0.0, 0.1, 0.0),
        ];
        assert_eq!(spec.check_alpha_sign(&pts), Err(Error::AngleCrossesZero));
    }

    fn random_points(case: &RandomFrameCase, rng: &mut impl Rng, n: usize) -> Vec<ChartPoint> {
        let b = &case.domain;
        (0..n)
            .map(|_| {
                let c: Vec<f64> = (0..3)
                    .map(|i| rng.gen_range(b.lower(i) + b.guard()..b.upper(i) - b.guard()))
                    .collect();
                ChartPoint::new(&c)
            })
            .collect()
    }

    #[test]
    fn random_families_satisfy_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for family in SubmersionFamily::ALL {
            for i in 0..2 {
                let case = random_frame_case(family, i, &mut rng);
                let pts = random_points(&case, &mut rng, 6);
                for (mode, tol) in [(DerivativeMode::Analytic, 1e-6), (DerivativeMode::Fd, 1e-3)] {
                    let q = case.q.clone().in_mode(mode);
                    let spec = AdaptedFrameSpec::new(
                        case.spec.theta.clone().in_mode(mode),
                        case.spec.alpha.clone().in_mode(mode),
                    );
                    let af =
                        AdaptedFrame::new(spec, Arc::new(ProductMetric3::product3(q))).unwrap();
                    let r = af.validate(&pts, tol);
                    assert!(r.is_ok(), "{} {mode}: {r:?}", case.label);

                    // first-leg geodesic and f3 = -E3(theta) via brackets
                    for p in &pts {
                        let conn = af.frame.connection_coefficients(p).unwrap();
                        assert!(conn[0][0].iter().all(|v| v.abs() < tol));
                        let br = af.frame.bracket_coefficients(p).unwrap();
                        let e3th = partial(&af.spec.theta, p, &[2]).unwrap();
                        assert!((br[0][2][1] + e3th).abs() < tol);
                        let v = |f: &ScalarField| f.value(p).unwrap();
                        let d = &af.data;
                        let a = af.spec.coefficients(p).unwrap();
                        // sigma^2 = kappa1 f2, and the a^3 relations
                        assert!((v(&d.sigma).powi(2) - v(&d.kappa1) * v(&d.f2)).abs() < 1e-6);
                        assert!(
                            (v(&d.kappa1) * a[2][2] - (v(&d.sigma) - v(&d.f3)) * a[1][2]).abs()
                                < 1e-6
                        );
                        assert!((v(&d.f2) * a[1][2] - v(&d.sigma) * a[2][2]).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn mutations_are_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let case = random_frame_case(SubmersionFamily::Warped, 0, &mut rng);
        let pts = random_points(&case, &mut rng, 5);
        let af = AdaptedFrame::new(
            case.spec.clone(),
            Arc::new(ProductMetric3::product3(case.q.clone())),
        )
        .unwrap();
        for name in ["f2", "sigma", "kappa1"] {
            let bad = af.data.mutated(name, 1.1).unwrap();
            match validate_frame(&af.frame, &bad, &pts, 1e-6) {
                Err(Error::ToleranceExceeded { identity, .. }) => {
                    assert!(identity.starts_with("connection") || identity.starts_with("curvature"))
                }
                other => panic!("{name}: mutation not detected: {other:?}"),
            }
        }
    }
}
