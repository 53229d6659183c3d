//! Building biharmonic submersions: the flat-target twisted family and the warped
//! family driven by the third-order angle ODE and its Riccati reduction.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frames::AdaptedFrameSpec;
use crate::geometry::SurfaceMetric;
use crate::numkernel::{partial, ChartBox, ChartPoint, ScalarField, Univariate};
use crate::report::{lower_bound_deficit, sweep};
use crate::submersion::{
    base_curvature, biharmonic_residuals, flat_target_spec, laplacian_py_residual,
    verify_submersion, SubmersionSpec, SubmersionVerification, TargetKind,
};

/// Margin kept around `sin(alpha) cos(alpha) = 0`.
pub const EPS_SING: f64 = 1e-3;

/// `u' = -2u^2 - ((sin^2 a + 3)/(sin a cos a)) u - (2cos^2 a + 3)/cos^2 a`, `u = alpha''/alpha'^2`.
pub fn riccati_rhs(alpha: f64, u: f64) -> Result<f64> {
    riccati_rhs_with(alpha, u, EPS_SING)
}

pub fn riccati_rhs_with(alpha: f64, u: f64, eps: f64) -> Result<f64> {
    let (s, c) = alpha.sin_cos();
    if !((s * c).abs() >= eps) {
        return Err(Error::SingularCoefficient { alpha });
    }
    Ok(-2.0 * u * u - (s * s + 3.0) / (s * c) * u - (2.0 * c * c + 3.0) / (c * c))
}

/// `alpha'''` from the third-order equation.
fn third_derivative(a: f64, a1: f64, a2: f64) -> f64 {
    let (s, c) = a.sin_cos();
    -(c * (s * s + 3.0) * a1 * a2 + s * (2.0 * c * c + 3.0) * a1 * a1 * a1) / (s * c * c)
}

/// `alpha''' sin a cos^2 a + cos a (sin^2 a + 3) a' a'' + sin a (2 cos^2 a + 3) a'^3`.
pub fn angle_ode(a: f64, a1: f64, a2: f64, a3: f64) -> f64 {
    let (s, c) = a.sin_cos();
    a3 * s * c * c + c * (s * s + 3.0) * a1 * a2 + s * (2.0 * c * c + 3.0) * a1 * a1 * a1
}

/// Sampled angle function with its first two derivatives at the nodes. Between nodes
/// it is the quintic Hermite interpolant, so it is `C^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaProfile {
    pub y_grid: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    /// Node values of `alpha'''` by differencing `alpha''`.
    alpha3: Vec<f64>,
    /// Set when integration stopped before the requested end.
    pub truncated: bool,
    /// Largest step-halving estimate of the local error.
    pub error_estimate: f64,
}

// quintic Hermite basis in t, coefficients of t^0..t^5
const H_BASIS: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
    [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
    [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
    [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
    [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
    [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
];

impl AlphaProfile {
    pub fn from_nodes(
        y_grid: Vec<f64>,
        alpha: Vec<f64>,
        alpha1: Vec<f64>,
        alpha2: Vec<f64>,
    ) -> Result<Self> {
        let n = y_grid.len();
        if n < 2 || alpha.len() != n || alpha1.len() != n || alpha2.len() != n {
            return Err(Error::InvalidArgument(
                "profile needs at least two nodes and equal column lengths".into(),
            ));
        }
        if y_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "profile grid must be increasing".into(),
            ));
        }
        let alpha3 = node_slopes(&y_grid, &alpha2);
        Ok(Self {
            y_grid,
            alpha,
            alpha1,
            alpha2,
            alpha3,
            truncated: false,
            error_estimate: 0.0,
        })
    }

    /// Samples a closed-form `[alpha, alpha', alpha'']` on `n` uniform nodes.
    pub fn from_fn(range: (f64, f64), n: usize, f: impl Fn(f64) -> [f64; 3]) -> Result<Self> {
        if n < 2 || !(range.1 > range.0) {
            return Err(Error::EmptyRange {
                lo: range.0,
                hi: range.1,
            });
        }
        let ys: Vec<f64> = (0..n)
            .map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64)
            .collect();
        let vals: Vec<[f64; 3]> = ys.iter().map(|&y| f(y)).collect();
        Self::from_nodes(
            ys,
            vals.iter().map(|v| v[0]).collect(),
            vals.iter().map(|v| v[1]).collect(),
            vals.iter().map(|v| v[2]).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.y_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_grid.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.y_grid[0], self.y_grid[self.len() - 1])
    }

    fn segment(&self, y: f64) -> usize {
        let i = self.y_grid.partition_point(|&g| g <= y);
        i.clamp(1, self.len() - 1) - 1
    }

    /// `[alpha, alpha', alpha'', alpha''']` of the interpolant. Outside the grid the
    /// end segments are extended. The third derivative comes from the cubic Hermite
    /// interpolant of `alpha''`, since differentiating the quintic three times loses
    /// about `eps / h^3` to cancellation.
    pub fn derivatives(&self, y: f64) -> [f64; 4] {
        let i = self.segment(y);
        let (y0, y1) = (self.y_grid[i], self.y_grid[i + 1]);
        let h = y1 - y0;
        let w = [
            self.alpha[i],
            h * self.alpha1[i],
            h * h * self.alpha2[i],
            h * h * self.alpha2[i + 1],
            h * self.alpha1[i + 1],
            self.alpha[i + 1],
        ];
        let mut c = [0.0; 6];
        for (wk, basis) in w.iter().zip(H_BASIS.iter()) {
            for (ck, bk) in c.iter_mut().zip(basis) {
                *ck += wk * bk;
            }
        }
        let t = (y - y0) / h;
        let mut out = [0.0; 4];
        let mut scale = 1.0;
        for (d, o) in out.iter_mut().take(3).enumerate() {
            let mut acc = 0.0;
            for k in (d..6).rev() {
                let falling: f64 = (0..d).map(|j| (k - j) as f64).product();
                acc = acc * t + falling * c[k];
            }
            // Horner above runs over powers k-d; rescale from t to y
            *o = acc / scale;
            scale *= h;
        }
        let (g0, g1) = (self.alpha2[i], self.alpha2[i + 1]);
        let (m0, m1) = (self.alpha3[i], self.alpha3[i + 1]);
        out[3] = (6.0 * t * (t - 1.0) * (g0 - g1)) / h
            + (3.0 * t * t - 4.0 * t + 1.0) * m0
            + (3.0 * t * t - 2.0 * t) * m1;
        out
    }

    /// The interpolant as a field of chart axis `axis`, with partials up to order 3.
    pub fn as_field(&self, axis: usize) -> ScalarField {
        let prof = Arc::new(self.clone());
        ScalarField::univariate(axis, move |y| prof.derivatives(y))
    }

    /// Checks both margins on every node.
    pub fn check(&self, eps: f64) -> Result<()> {
        for i in 0..self.len() {
            let (s, c) = self.alpha[i].sin_cos();
            if !((s * c).abs() >= eps) || self.alpha1[i] == 0.0 || !self.alpha1[i].is_finite() {
                return Err(Error::SingularProfile { y: self.y_grid[i] });
            }
        }
        if self
            .alpha1
            .windows(2)
            .any(|w| w[0].signum() != w[1].signum())
        {
            let i = self
                .alpha1
                .windows(2)
                .position(|w| w[0].signum() != w[1].signum())
                .unwrap();
            return Err(Error::SingularProfile {
                y: self.y_grid[i + 1],
            });
        }
        Ok(())
    }

    /// Text form: header `y alpha alpha1 alpha2`, one node per line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("y alpha alpha1 alpha2\n");
        for i in 0..self.len() {
            writeln!(
                s,
                "{} {} {} {}",
                self.y_grid[i], self.alpha[i], self.alpha1[i], self.alpha2[i]
            )
            .expect("writing to a String");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h)
                if h.split_whitespace().collect::<Vec<_>>()
                    == ["y", "alpha", "alpha1", "alpha2"] => {}
            _ => return Err(Error::InvalidArgument("missing profile header".into())),
        }
        let mut cols = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for (n, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(format!("profile line {}: {e}", n + 2)))?;
            if vals.len() != 4 {
                return Err(Error::InvalidArgument(format!(
                    "profile line {} needs 4 columns",
                    n + 2
                )));
            }
            for (c, v) in cols.iter_mut().zip(vals) {
                c.push(v);
            }
        }
        let [y, a, a1, a2] = cols;
        Self::from_nodes(y, a, a1, a2)
    }
}

/// Central differences inside, second-order one-sided differences at the ends.
fn node_slopes(y: &[f64], g: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n == 2 {
        let d = (g[1] - g[0]) / (y[1] - y[0]);
        return vec![d, d];
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (g[i + 1] - g[i - 1]) / (y[i + 1] - y[i - 1]);
    }
    let end = |a: usize, b: usize, c: usize| {
        // derivative at y[a] of the parabola through a, b, c
        let (h1, h2) = (y[b] - y[a], y[c] - y[a]);
        ((g[b] - g[a]) * h2 * h2 - (g[c] - g[a]) * h1 * h1) / (h1 * h2 * (h2 - h1))
    };
    out[0] = end(0, 1, 2);
    out[n - 1] = end(n - 1, n - 2, n - 3);
    out
}

type State = [f64; 3];

fn rhs(s: &State) -> State {
    [s[1], s[2], third_derivative(s[0], s[1], s[2])]
}

fn rk4(s: &State, h: f64) -> State {
    let add = |a: &State, b: &State, k: f64| [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]];
    let k1 = rhs(s);
    let k2 = rhs(&add(s, &k1, h / 2.0));
    let k3 = rhs(&add(s, &k2, h / 2.0));
    let k4 = rhs(&add(s, &k3, h));
    let mut out = *s;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn within_margins(s: &State, sign: f64, eps: f64) -> bool {
    let (sn, cs) = s[0].sin_cos();
    s.iter().all(|x| x.is_finite()) && (sn * cs).abs() >= eps && s[1] * sign > 0.0
}

/// Integrates the third-order angle equation with RK4 from `y_span.0`. Each step is
/// taken as two half steps; the full step gives the error estimate.
pub fn integrate_alpha(
    alpha0: f64,
    alpha1_0: f64,
    alpha2_0: f64,
    y_span: (f64, f64),
    step: f64,
) -> Result<AlphaProfile> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {step}"
        )));
    }
    if !(y_span.1 > y_span.0) {
        return Err(Error::EmptyRange {
            lo: y_span.0,
            hi: y_span.1,
        });
    }
    let start = [alpha0, alpha1_0, alpha2_0];
    let sign = alpha1_0.signum();
    if alpha1_0 == 0.0 || !within_margins(&start, sign, EPS_SING) {
        return Err(Error::ImmediateSingularity(format!(
            "initial data (alpha={alpha0}, alpha'={alpha1_0}) violates the margins"
        )));
    }
    let n = ((y_span.1 - y_span.0) / step - 1e-9).ceil().max(1.0) as usize;
    let h = (y_span.1 - y_span.0) / n as f64;
    let mut ys = vec![y_span.0];
    let mut states = vec![start];
    let mut err: f64 = 0.0;
    let mut truncated = false;
    let mut s = start;
    for k in 1..=n {
        let full = rk4(&s, h);
        let half = rk4(&rk4(&s, h / 2.0), h / 2.0);
        if !within_margins(&half, sign, EPS_SING) {
            truncated = true;
            break;
        }
        let local = (0..3)
            .map(|i| (full[i] - half[i]).abs())
            .fold(0.0, f64::max)
            / 15.0;
        err = err.max(local);
        s = half;
        ys.push(y_span.0 + k as f64 * h);
        states.push(s);
    }
    if states.len() < 2 {
        return Err(Error::ImmediateSingularity(
            "margin violated within the first step".into(),
        ));
    }
    let mut prof = AlphaProfile::from_nodes(
        ys,
        states.iter().map(|s| s[0]).collect(),
        states.iter().map(|s| s[1]).collect(),
        states.iter().map(|s| s[2]).collect(),
    )?;
    prof.truncated = truncated;
    prof.error_estimate = err;
    Ok(prof)
}

/// Third-order residual at `y`, with `alpha'''` from central differences of the
/// `alpha''` nodes (linearly interpolated between nodes).
pub fn alpha_ode_residual(profile: &AlphaProfile, y: f64) -> Result<f64> {
    let n = profile.len();
    if n < 4 || !(y >= profile.y_grid[1] && y <= profile.y_grid[n - 2]) {
        return Err(Error::OutOfProfile { y });
    }
    let node_a3 = |i: usize| {
        (profile.alpha2[i + 1] - profile.alpha2[i - 1])
            / (profile.y_grid[i + 1] - profile.y_grid[i - 1])
    };
    let i = profile.y_grid.partition_point(|&g| g <= y).clamp(2, n - 2) - 1;
    let (y0, y1) = (profile.y_grid[i], profile.y_grid[i + 1]);
    let t = (y - y0) / (y1 - y0);
    let a3 = if t == 0.0 {
        node_a3(i)
    } else {
        (1.0 - t) * node_a3(i) + t * node_a3(i + 1)
    };
    let d = profile.derivatives(y);
    let (a, a1, a2) = if t == 0.0 {
        (profile.alpha[i], profile.alpha1[i], profile.alpha2[i])
    } else {
        (d[0], d[1], d[2])
    };
    Ok(angle_ode(a, a1, a2, a3))
}

/// Integrates the Riccati equation in the `alpha` variable from the first node and
/// returns the largest deviation from `alpha''/alpha'^2` along the profile.
pub fn riccati_cross_check(profile: &AlphaProfile, substeps: usize) -> Result<f64> {
    let u_at = |i: usize| profile.alpha2[i] / (profile.alpha1[i] * profile.alpha1[i]);
    let mut u = u_at(0);
    let mut dev: f64 = 0.0;
    let m = substeps.max(1);
    for i in 0..profile.len() - 1 {
        let (a0, a1) = (profile.alpha[i], profile.alpha[i + 1]);
        let h = (a1 - a0) / m as f64;
        for k in 0..m {
            let a = a0 + k as f64 * h;
            let k1 = riccati_rhs(a, u)?;
            let k2 = riccati_rhs(a + h / 2.0, u + h / 2.0 * k1)?;
            let k3 = riccati_rhs(a + h / 2.0, u + h / 2.0 * k2)?;
            let k4 = riccati_rhs(a + h, u + h * k3)?;
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        dev = dev.max((u - u_at(i + 1)).abs());
    }
    Ok(dev)
}

/// Flat-target submersion with the harmonic-`p_y` residual attached.
#[derive(Debug, Clone)]
pub struct FlatTargetBuild {
    pub spec: SubmersionSpec,
    pub laplacian_py: ScalarField,
    /// `p_y` vanishes on the sample grid, so the map is harmonic.
    pub harmonic: bool,
}

pub fn build_flat_target(label: &str, p: ScalarField, domain: ChartBox) -> Result<FlatTargetBuild> {
    let spec = flat_target_spec(label, p.clone(), domain)?;
    let pd = p.with_domain(domain);
    let pm = pd.clone();
    let mr = ScalarField::derived(pd.depth_after(3), move |pt| {
        laplacian_py_residual(&pm, pt).unwrap_or(f64::NAN)
    })
    .with_domain(domain);
    let mut harmonic = true;
    for pt in spec.grid([5, 5])? {
        if partial(&pd, &pt, &[1])?.abs() > 1e-12 {
            harmonic = false;
            break;
        }
    }
    Ok(FlatTargetBuild {
        spec,
        laplacian_py: mr,
        harmonic,
    })
}

/// Free data of the warped construction.
#[derive(Debug, Clone)]
pub struct ConstructionSpec {
    pub profile: AlphaProfile,
    pub phi: ScalarField,
    pub w: ScalarField,
    pub f: ScalarField,
    /// x-box on which `phi` is declared.
    pub x_range: (f64, f64),
    pub branch_sign: f64,
}

impl ConstructionSpec {
    /// `phi = w = 0`, `F = id`, branch `+`.
    pub fn canonical(profile: AlphaProfile) -> Self {
        Self {
            profile,
            phi: ScalarField::constant(0.0),
            w: ScalarField::constant(0.0),
            f: ScalarField::coordinate(0),
            x_range: (0.0, 1.0),
            branch_sign: 1.0,
        }
    }
}

fn ln_abs_tan() -> Univariate {
    Arc::new(|a: f64| {
        let (s2, c2) = (2.0 * a).sin_cos();
        [
            a.tan().abs().ln(),
            2.0 / s2,
            -4.0 * c2 / (s2 * s2),
            8.0 * (1.0 + c2 * c2) / (s2 * s2 * s2),
        ]
    })
}

fn ln_abs_sin() -> Univariate {
    Arc::new(|a: f64| {
        let (s, c) = a.sin_cos();
        let cot = c / s;
        let csc2 = 1.0 / (s * s);
        [s.abs().ln(), cot, -csc2, 2.0 * csc2 * cot]
    })
}

/// Warped-family submersion in general and canonical coordinates.
#[derive(Debug, Clone)]
pub struct NonFlatConstruction {
    /// Domain `e^{2p}dx^2 + dy^2 + dz^2`, `p = ln|tan alpha(y)| + phi(x)`.
    pub general: SubmersionSpec,
    /// Domain `tan^2 alpha(y) dt^2 + dy^2 + dz^2`.
    pub canonical: SubmersionSpec,
    /// Target `dy^2 + e^{2 lambda} dphi^2`, `lambda = ln|sin alpha(y)| + w(phi)`.
    pub target_general: SurfaceMetric,
    /// Target `dy^2 + sin^2 alpha(y) dpsi^2`.
    pub target_canonical: SurfaceMetric,
    pub data: ConstructionSpec,
}

impl NonFlatConstruction {
    /// `int_{x0}^{x} e^{phi}` by composite Simpson, refined until two passes agree to 1e-10.
    pub fn t_of_x(&self, x: f64) -> Result<f64> {
        let x0 = self.data.x_range.0;
        let f = |s: f64| -> Result<f64> { Ok(self.data.phi.value(&ChartPoint::new(&[s]))?.exp()) };
        let simpson = |n: usize| -> Result<f64> {
            let h = (x - x0) / n as f64;
            let mut acc = f(x0)? + f(x)?;
            for k in 1..n {
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x0 + k as f64 * h)?;
            }
            Ok(acc * h / 3.0)
        };
        let mut n = 16;
        let mut prev = simpson(n)?;
        loop {
            n *= 2;
            let next = simpson(n)?;
            if (next - prev).abs() <= 1e-10 || n >= 1 << 20 {
                return Ok(next);
            }
            prev = next;
        }
    }

    /// `(y, F(z +- int e^phi dx))`.
    pub fn projection(&self, p: &ChartPoint) -> Result<[f64; 2]> {
        let u = p.coord(2) + self.data.branch_sign * self.t_of_x(p.coord(0))?;
        Ok([p.coord(1), self.data.f.value(&ChartPoint::new(&[u]))?])
    }

    /// `(y, F(z +- t))`.
    pub fn canonical_projection(&self, p: &ChartPoint) -> Result<[f64; 2]> {
        let u = p.coord(2) + self.data.branch_sign * p.coord(0);
        Ok([p.coord(1), self.data.f.value(&ChartPoint::new(&[u]))?])
    }
}

/// `-(sin alpha)''/sin alpha = alpha'^2 - alpha'' cot alpha` as a field of axis `axis`.
pub fn target_gauss_field(profile: &AlphaProfile, axis: usize) -> ScalarField {
    let prof = profile.clone();
    ScalarField::new(move |p| {
        let d = prof.derivatives(p.coord(axis));
        d[1] * d[1] - d[2] * d[0].cos() / d[0].sin()
    })
}

pub fn build_nonflat_target(spec: ConstructionSpec) -> Result<NonFlatConstruction> {
    spec.profile.check(EPS_SING)?;
    let (y_lo, y_hi) = spec.profile.range();
    let guard = 0.05_f64.min(0.1 * (y_hi - y_lo));
    let domain = ChartBox::new(
        &[spec.x_range.0, y_lo, 0.0],
        &[spec.x_range.1, y_hi, 1.0],
        guard,
    )?;
    let alpha = spec.profile.as_field(1);
    let frame = || AdaptedFrameSpec::new(ScalarField::constant(FRAC_PI_2), alpha.clone());
    let q = alpha.compose(ln_abs_tan());
    let gauss = target_gauss_field(&spec.profile, 1);
    let target_canonical =
        SurfaceMetric::surface(spec.profile.as_field(0).compose(ln_abs_sin()), 1)?;
    let target_general = SurfaceMetric::surface(
        spec.profile
            .as_field(0)
            .compose(ln_abs_sin())
            .sum(&shift_axis(&spec.w, 1)),
        1,
    )?;
    let canonical = SubmersionSpec::new(
        "warped(canonical)",
        q.clone(),
        frame(),
        domain,
        TargetKind::NonFlat,
    )?
    .with_target(target_canonical.clone(), Some(gauss.clone()));
    let general = SubmersionSpec::new(
        "warped(general)",
        q.sum(&shift_axis(&spec.phi, 0)),
        frame(),
        domain,
        TargetKind::NonFlat,
    )?
    .with_target(target_general.clone(), Some(gauss));
    Ok(NonFlatConstruction {
        general,
        canonical,
        target_general,
        target_canonical,
        data: spec,
    })
}

/// Reinterprets a one-variable field as a field of chart axis `axis`.
fn shift_axis(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.clone();
    let out = ScalarField::coordinate(axis).compose(Arc::new(move |x: f64| {
        let p = ChartPoint::new(&[x]);
        let d = |ax: &[usize]| g.analytic(&p, ax).unwrap_or(f64::NAN);
        [g.eval_raw(&p), d(&[0]), d(&[0, 0]), d(&[0, 0, 0])]
    }));
    if f.analytic_order() >= 3 {
        out
    } else {
        let g = f.clone();
        ScalarField::derived(f.fd_depth(), move |p| {
            g.eval_raw(&ChartPoint::new(&[p.coord(axis)]))
        })
    }
}

/// Channel names added for warped-family specs.
pub const NONFLAT_CHANNELS: [&str; 6] = [
    "alpha' + sigma",
    "angle ode",
    "r1 cos^3(alpha) - angle ode",
    "K^N - target",
    "f2 kappa1 sigma deficit",
    "K^N deficit",
];

/// Biharmonic residuals on the grid, plus the side conditions of the warped family.
pub fn verify_construction(
    spec: &SubmersionSpec,
    counts: [usize; 2],
    tol: f64,
) -> Result<SubmersionVerification> {
    let mut out = verify_submersion(spec, counts, tol)?;
    if spec.kind != TargetKind::NonFlat {
        return Ok(out);
    }
    let alpha = &spec.adapted.spec.alpha;
    let gauss = spec
        .target_gauss
        .clone()
        .ok_or_else(|| Error::InvalidArgument("warped spec without target curvature".into()))?;
    let points = spec.grid(counts)?;
    let extra = sweep(&spec.label, &points, tol, &NONFLAT_CHANNELS, |p| {
        let d = spec.data();
        let a = alpha.value(p)?;
        let a1 = partial(alpha, p, &[1])?;
        let a2 = partial(alpha, p, &[1, 1])?;
        let a3 = partial(alpha, p, &[1, 1, 1])?;
        let sigma = d.sigma.value(p)?;
        let z = angle_ode(a, a1, a2, a3);
        let (r1, _) = biharmonic_residuals(spec, p)?;
        let kn = base_curvature(d, spec.frame(), p)?;
        let prod = d.f2.value(p)? * d.kappa1.value(p)? * sigma;
        Ok(vec![
            a1 + sigma,
            z,
            r1 * a.cos().powi(3) - z,
            kn - gauss.value(p)?,
            lower_bound_deficit(prod, tol),
            lower_bound_deficit(kn, tol),
        ])
    })?;
    out.report.absorb(extra);
    Ok(out)
}

/// Sample points of a profile's interior nodes, for residual sweeps.
pub fn interior_nodes(profile: &AlphaProfile) -> &[f64] {
    let n = profile.len();
    if n < 4 {
        &[]
    } else {
        &profile.y_grid[1..n - 1]
    }
}
