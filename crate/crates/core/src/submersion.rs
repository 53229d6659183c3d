//! Riemannian submersions from `e^{2q}dt^2 + ds^2 + dz^2` onto surfaces, described
//! through an adapted frame: harmonicity, the biharmonic residual pair, the example
//! catalog and the slope scan for the hyperbolic family.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::{AdaptedFrame, AdaptedFrameSpec, FrameField, IntegrabilityData};
use crate::geometry::{laplace_beltrami, ProductMetric3, SurfaceMetric};
use crate::numkernel::{sample_grid, ChartBox, ChartPoint, DerivativeMode, ScalarField};
use crate::report::{reduce, sweep, GridRow, ResidualReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Flat,
    NonFlat,
}

/// A submersion given by the exponent `q` of the domain metric and the frame angles.
#[derive(Debug, Clone)]
pub struct SubmersionSpec {
    pub label: String,
    pub adapted: AdaptedFrame,
    pub domain: ChartBox,
    pub kind: TargetKind,
    pub target: Option<SurfaceMetric>,
    /// Independent closed form of the target curvature pulled back to the domain chart.
    pub target_gauss: Option<ScalarField>,
}

impl SubmersionSpec {
    pub fn new(
        label: impl Into<String>,
        q: ScalarField,
        frame_spec: AdaptedFrameSpec,
        domain: ChartBox,
        kind: TargetKind,
    ) -> Result<Self> {
        if domain.dim() != 3 {
            return Err(Error::InvalidArgument(
                "submersion domains are 3-dimensional".into(),
            ));
        }
        let metric = Arc::new(ProductMetric3::product3(q.with_domain(domain)));
        Ok(Self {
            label: label.into(),
            adapted: AdaptedFrame::new(frame_spec, metric)?,
            domain,
            kind,
            target: None,
            target_gauss: None,
        })
    }

    pub fn with_target(mut self, target: SurfaceMetric, gauss: Option<ScalarField>) -> Self {
        self.target = Some(target);
        self.target_gauss = gauss;
        self
    }

    pub fn data(&self) -> &IntegrabilityData {
        &self.adapted.data
    }

    pub fn frame(&self) -> &FrameField {
        &self.adapted.frame
    }

    pub fn exponent(&self) -> &ScalarField {
        self.adapted.metric.exponent()
    }

    /// Same spec with attached partials kept (analytic) or dropped (fd).
    pub fn in_mode(&self, mode: DerivativeMode) -> Result<Self> {
        let spec = AdaptedFrameSpec::new(
            self.adapted.spec.theta.clone().in_mode(mode),
            self.adapted.spec.alpha.clone().in_mode(mode),
        );
        let q = self.exponent().clone().in_mode(mode);
        let mut out = Self::new(self.label.clone(), q, spec, self.domain, self.kind)?;
        out.target = self.target.clone();
        out.target_gauss = self.target_gauss.clone().map(|k| k.in_mode(mode));
        Ok(out)
    }

    /// `counts[0] x counts[1]` grid over the first two axes of the guarded box at
    /// the middle `z`.
    pub fn grid(&self, counts: [usize; 2]) -> Result<Vec<ChartPoint>> {
        let b = &self.domain;
        let plane = ChartBox::new(
            &[b.lower(0), b.lower(1)],
            &[b.upper(0), b.upper(1)],
            b.guard(),
        )?;
        let z = 0.5 * (b.lower(2) + b.upper(2));
        Ok(sample_grid(&plane, &counts)?
            .into_iter()
            .map(|p| ChartPoint::xyz(p.coord(0), p.coord(1), z))
            .collect())
    }

    /// Three `z` values spread over the guarded box.
    pub fn z_samples(&self) -> [f64; 3] {
        let b = &self.domain;
        let (lo, hi) = (b.lower(2) + b.guard(), b.upper(2) - b.guard());
        [lo, 0.5 * (lo + hi), hi]
    }
}

/// `K^N = e_1(f_2) - e_2(f_1) - f_1^2 - f_2^2 + 2 f_3 sigma`.
pub fn base_curvature(data: &IntegrabilityData, frame: &FrameField, p: &ChartPoint) -> Result<f64> {
    let f1 = data.f1.value(p)?;
    let f2 = data.f2.value(p)?;
    let f3 = data.f3.value(p)?;
    let s = data.sigma.value(p)?;
    Ok(
        frame.apply(0, &data.f2, p)? - frame.apply(1, &data.f1, p)? - f1 * f1 - f2 * f2
            + 2.0 * f3 * s,
    )
}

/// The two biharmonic equations of the submersion evaluated at `p`.
pub fn biharmonic_residuals(spec: &SubmersionSpec, p: &ChartPoint) -> Result<(f64, f64)> {
    let d = spec.data();
    let frame = spec.frame();
    let f = [d.f1.value(p)?, d.f2.value(p)?];
    let k = [d.kappa1.value(p)?, d.kappa2.value(p)?];
    let fs = [&d.f1, &d.f2];
    let lap1 = laplace_beltrami(frame, &d.kappa1, p)?;
    let lap2 = laplace_beltrami(frame, &d.kappa2, p)?;
    let mut f_e_k1 = 0.0;
    let mut f_e_k2 = 0.0;
    let mut div = 0.0;
    for i in 0..2 {
        if f[i] != 0.0 {
            f_e_k1 += f[i] * frame.apply(i, &d.kappa1, p)?;
            f_e_k2 += f[i] * frame.apply(i, &d.kappa2, p)?;
        }
        div += frame.apply(i, fs[i], p)? - k[i] * f[i];
    }
    let kn = base_curvature(d, frame, p)?;
    let fsq = f[0] * f[0] + f[1] * f[1];
    let r1 = -lap1 - 2.0 * f_e_k2 - k[1] * div + k[0] * (-kn + fsq);
    let r2 = -lap2 + 2.0 * f_e_k1 + k[0] * div + k[1] * (-kn + fsq);
    Ok((r1, r2))
}

/// Outcome of the harmonicity test.
#[derive(Debug, Clone)]
pub struct Harmonicity {
    pub harmonic: bool,
    pub report: ResidualReport,
}

/// Harmonic iff both fiber curvatures vanish on `points`. For harmonic specs the
/// report also carries `sigma` and the deviation `K^N - K^{M^2}`.
pub fn harmonicity_test(
    spec: &SubmersionSpec,
    points: &[ChartPoint],
    tol: f64,
) -> Result<Harmonicity> {
    let d = spec.data();
    let kappas = sweep(&spec.label, points, tol, &["kappa1", "kappa2"], |p| {
        Ok(vec![d.kappa1.value(p)?, d.kappa2.value(p)?])
    })?;
    let harmonic = kappas.passed();
    let mut report = kappas;
    if harmonic {
        let k_base = spec
            .frame()
            .base_curvature()
            .cloned()
            .unwrap_or_else(|| ScalarField::constant(0.0));
        let extra = sweep(&spec.label, points, tol, &["sigma", "K^N - K^M"], |p| {
            let kn = base_curvature(d, spec.frame(), p)?;
            Ok(vec![d.sigma.value(p)?, kn - k_base.value(p)?])
        })?;
        report.absorb(extra);
    }
    Ok(Harmonicity { harmonic, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmersionClass {
    ProperBiharmonic,
    Harmonic,
    Indeterminate,
    NotBiharmonic,
}

/// Labels a verified spec from the size of its fiber curvature.
pub fn classify(residuals_pass: bool, max_kappa: f64, tol: f64) -> SubmersionClass {
    if !residuals_pass {
        SubmersionClass::NotBiharmonic
    } else if max_kappa > 100.0 * tol {
        SubmersionClass::ProperBiharmonic
    } else if max_kappa <= tol {
        SubmersionClass::Harmonic
    } else {
        SubmersionClass::Indeterminate
    }
}

/// Grid verification of the residual pair.
#[derive(Debug, Clone)]
pub struct SubmersionVerification {
    pub report: ResidualReport,
    pub rows: Vec<GridRow>,
    pub max_kappa: f64,
    pub class: SubmersionClass,
}

/// Evaluates `(r1, r2)` on the default grid. All fields are `z`-independent by
/// construction; the `z_spread` channel confirms it on a few points by comparing
/// residuals at three heights.
pub fn verify_submersion(
    spec: &SubmersionSpec,
    counts: [usize; 2],
    tol: f64,
) -> Result<SubmersionVerification> {
    let points = spec.grid(counts)?;
    let values: Vec<(f64, f64, f64)> = {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|p| {
                let (r1, r2) = biharmonic_residuals(spec, p)?;
                let k = spec
                    .data()
                    .kappa1
                    .value(p)?
                    .abs()
                    .max(spec.data().kappa2.value(p)?.abs());
                Ok((r1, r2, k))
            })
            .collect::<Result<Vec<_>>>()?
    };
    let mut report = reduce(
        &spec.label,
        &points,
        tol,
        &["r1", "r2"],
        values.iter().map(|v| vec![v.0, v.1]).collect(),
    )?;
    let probes: Vec<ChartPoint> = [0, points.len() / 2, points.len() - 1]
        .iter()
        .map(|&i| points[i])
        .collect();
    let zs = spec.z_samples();
    let z_report = sweep(&spec.label, &probes, tol, &["z_spread"], |p| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &z in &zs {
            let (r1, r2) = biharmonic_residuals(spec, &p.with_coord(2, z))?;
            for r in [r1, r2] {
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        Ok(vec![hi - lo])
    })?;
    report.absorb(z_report);
    let rows = points
        .iter()
        .zip(&values)
        .map(|(p, v)| GridRow {
            axis1: p.coord(0),
            axis2: p.coord(1),
            r1: v.0,
            r2: v.1,
        })
        .collect();
    let max_kappa = values.iter().map(|v| v.2).fold(0.0, f64::max);
    let class = classify(report.passed(), max_kappa, tol);
    Ok(SubmersionVerification {
        report,
        rows,
        max_kappa,
        class,
    })
}

fn ln_fn() -> crate::numkernel::Univariate {
    Arc::new(|x: f64| [x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
}

/// Flat-target projection `(x, y, z) -> (y, z)` from `e^{2p}dx^2 + dy^2 + dz^2`.
pub fn flat_target_spec(label: &str, p: ScalarField, domain: ChartBox) -> Result<SubmersionSpec> {
    let right = ScalarField::constant(FRAC_PI_2);
    Ok(SubmersionSpec::new(
        label,
        p,
        AdaptedFrameSpec::new(right.clone(), right),
        domain,
        TargetKind::Flat,
    )?
    .with_target(SurfaceMetric::flat(2), Some(ScalarField::constant(0.0))))
}

fn unit_box(y_lo: f64, y_hi: f64) -> ChartBox {
    ChartBox::new(&[0.0, y_lo, 0.0], &[1.0, y_hi, 1.0], 0.05).expect("static box")
}

/// `p = 2 ln cosh y`.
pub fn cosh4_spec() -> SubmersionSpec {
    let p = ScalarField::univariate(1, |y| {
        let t = y.tanh();
        let sech2 = 1.0 - t * t;
        [2.0 * y.cosh().ln(), 2.0 * t, 2.0 * sech2, -4.0 * t * sech2]
    });
    flat_target_spec("cosh4", p, unit_box(-1.5, 1.5)).expect("static spec")
}

/// `p = 2 ln y` on `y > 0`.
pub fn y4_spec() -> SubmersionSpec {
    let p = ScalarField::univariate(1, |y| {
        [2.0 * y.ln(), 2.0 / y, -2.0 / (y * y), 4.0 / (y * y * y)]
    });
    flat_target_spec("y4", p, unit_box(0.5, 3.0)).expect("static spec")
}

/// `p = sqrt(-c) y` for `c < 0`.
pub fn hyperbolic_spec(c: f64) -> Result<SubmersionSpec> {
    if !(c < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hyperbolic family needs c < 0, got {c}"
        )));
    }
    let a = (-c).sqrt();
    flat_target_spec(
        &format!("hyperbolic({c})"),
        ScalarField::coordinate(1).scaled(a),
        unit_box(-1.0, 1.0),
    )
}

/// The proper biharmonic examples: `cosh4`, `y4`, `hyperbolic(-1)`, `hyperbolic(-2)`.
pub fn catalog_examples() -> Vec<SubmersionSpec> {
    vec![
        cosh4_spec(),
        y4_spec(),
        hyperbolic_spec(-1.0).expect("c < 0"),
        hyperbolic_spec(-2.0).expect("c < 0"),
    ]
}

/// Residual of the slope family `p = a y` in `M^2(c) x R`, from
/// `Delta kappa_1 = e_3 e_3 kappa_1 + kappa_1^3 + c kappa_1` with `kappa_1 = -a`
/// (constant along the fibers): `r1 = -(kappa_1^3 + c kappa_1) = a (a^2 + c)`.
pub fn hyperbolic_scan_residual(c: f64, a: f64) -> f64 {
    let k = -a;
    -(k * k * k + c * k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRoot {
    pub slope: f64,
    pub class: SubmersionClass,
}

/// Sign-change bracketing of [`hyperbolic_scan_residual`] over `range` with
/// `samples` nodes, each bracket refined by bisection to width 1e-8.
pub fn hyperbolic_uniqueness_scan(
    c: f64,
    range: (f64, f64),
    samples: usize,
) -> Result<Vec<ScanRoot>> {
    let (lo, hi) = range;
    if !(lo < hi) {
        return Err(Error::EmptyRange { lo, hi });
    }
    if samples < 3 {
        return Err(Error::InvalidArgument(
            "scan needs at least 3 samples".into(),
        ));
    }
    let r = |a: f64| hyperbolic_scan_residual(c, a);
    let nodes: Vec<f64> = (0..samples)
        .map(|k| {
            if k == samples - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (samples - 1) as f64
            }
        })
        .collect();
    let mut roots: Vec<f64> = Vec::new();
    for (k, &a) in nodes.iter().enumerate() {
        let ra = r(a);
        if ra == 0.0 {
            roots.push(a);
            continue;
        }
        let Some(&b) = nodes.get(k + 1) else { break };
        let rb = r(b);
        if ra * rb < 0.0 {
            let (mut x0, mut x1, mut r0) = (a, b, ra);
            while x1 - x0 > 1e-8 {
                let m = 0.5 * (x0 + x1);
                let rm = r(m);
                if rm == 0.0 {
                    x0 = m;
                    x1 = m;
                    break;
                }
                if (rm < 0.0) == (r0 < 0.0) {
                    x0 = m;
                    r0 = rm;
                } else {
                    x1 = m;
                }
            }
            roots.push(0.5 * (x0 + x1));
        }
    }
    Ok(roots
        .into_iter()
        .map(|slope| ScanRoot {
            slope,
            class: if slope.abs() <= 1e-8 {
                SubmersionClass::Harmonic
            } else {
                SubmersionClass::ProperBiharmonic
            },
        })
        .collect())
}

/// Flat domain and flat target: `p = ln(a(x) y + b(x))` with `e^p` affine in `y`.
#[derive(Debug, Clone)]
pub struct FlatFlatCase {
    pub spec: SubmersionSpec,
    /// Whether `a(x)` vanishes identically, so that `kappa_1 = -p_y = 0`.
    pub harmonic_member: bool,
    pub p: ScalarField,
}

pub fn random_flat_flat(index: usize, harmonic_member: bool, rng: &mut impl Rng) -> FlatFlatCase {
    let x = ScalarField::coordinate(0);
    let y = ScalarField::coordinate(1);
    let a = if harmonic_member {
        ScalarField::constant(0.0)
    } else {
        let (a0, a1, w) = (
            rng.gen_range(0.4..1.5),
            rng.gen_range(-0.3..0.3),
            rng.gen_range(0.5..2.0),
        );
        x.scaled(w).sin().scaled(a1).sum(&ScalarField::constant(a0))
    };
    let (b0, b1) = (rng.gen_range(0.3..1.0), rng.gen_range(-0.2..0.2));
    let b = x.scaled(b1).sum(&ScalarField::constant(b0));
    let p = a.mul(&y).sum(&b).compose(ln_fn());
    let domain = unit_box(0.5, 1.5);
    let spec =
        flat_target_spec(&format!("flat-flat#{index}"), p.clone(), domain).expect("static spec");
    FlatFlatCase {
        spec,
        harmonic_member,
        p: p.with_domain(domain),
    }
}

/// `p_yyy + p_yy p_y + e^{-2p}(p_xxy - p_xy p_x)` for a flat-target exponent.
pub fn laplacian_py_residual(p: &ScalarField, pt: &ChartPoint) -> Result<f64> {
    use crate::numkernel::partial;
    let py = partial(p, pt, &[1])?;
    let pyy = partial(p, pt, &[1, 1])?;
    let pyyy = partial(p, pt, &[1, 1, 1])?;
    let px = partial(p, pt, &[0])?;
    let pxy = partial(p, pt, &[0, 1])?;
    let pxxy = partial(p, pt, &[0, 0, 1])?;
    Ok(pyyy + pyy * py + (-2.0 * p.value(pt)?).exp() * (pxxy - pxy * px))
}
