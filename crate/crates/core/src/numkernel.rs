//! Chart points, boxes, scalar fields and their partial derivatives.
//!
//! Every geometric quantity in the crate is a [`ScalarField`] over a rectangular
//! chart. A field may carry analytic partial derivatives; whatever it does not
//! supply is recovered with central finite differences. Derived fields (frame
//! derivatives, curvature data, ...) are plain closures over their inputs and are
//! differentiated numerically, so nested differentiation stays uniform.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Finite-difference step for first and second order stencils.
pub const H_FD: f64 = 1e-4;
/// Finite-difference step once three or more derivative orders are stacked.
pub const H_FD_THIRD: f64 = 1e-3;

/// Step size for a stencil whose total derivative order (including orders already
/// taken numerically inside the field) is `total_order`.
pub fn fd_step(total_order: u32) -> f64 {
    if total_order <= 2 {
        H_FD
    } else {
        H_FD_THIRD
    }
}

/// How base fields expose derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeMode {
    /// Closed-form partials are attached wherever they are known.
    Analytic,
    /// All partials are recovered by central differences.
    Fd,
}

impl FromStr for DerivativeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "fd" => Ok(Self::Fd),
            other => Err(Error::InvalidArgument(format!(
                "unknown derivative mode `{other}` (expected analytic|fd)"
            ))),
        }
    }
}

impl fmt::Display for DerivativeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Analytic => f.write_str("analytic"),
            Self::Fd => f.write_str("fd"),
        }
    }
}

/// A point of a 1-, 2- or 3-dimensional chart. Unused trailing coordinates are zero.
#[derive(Clone, Copy, PartialEq)]
pub struct ChartPoint {
    coords: [f64; 3],
    dim: usize,
}

impl ChartPoint {
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            (1..=3).contains(&coords.len()),
            "chart points have 1 to 3 coordinates"
        );
        let mut c = [0.0; 3];
        c[..coords.len()].copy_from_slice(coords);
        Self {
            coords: c,
            dim: coords.len(),
        }
    }

    pub fn xy(a: f64, b: f64) -> Self {
        Self::new(&[a, b])
    }

    pub fn xyz(a: f64, b: f64, c: f64) -> Self {
        Self::new(&[a, b, c])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinate `axis`; axes beyond the chart dimension read as zero.
    pub fn coord(&self, axis: usize) -> f64 {
        self.coords.get(axis).copied().unwrap_or(0.0)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn shifted(&self, axis: usize, delta: f64) -> Self {
        let mut out = *self;
        out.coords[axis] += delta;
        out
    }

    pub fn with_coord(&self, axis: usize, value: f64) -> Self {
        let mut out = *self;
        out.coords[axis] = value;
        out
    }

    /// Same point viewed in a chart of dimension `dim` (extra coordinates are zero).
    pub fn embedded(&self, dim: usize) -> Self {
        let mut out = *self;
        for c in out.coords.iter_mut().skip(dim) {
            *c = 0.0;
        }
        out.dim = dim;
        out
    }
}

impl fmt::Debug for ChartPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl Serialize for ChartPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim))?;
        for c in self.coords() {
            seq.serialize_element(c)?;
        }
        seq.end()
    }
}

/// Axis-aligned chart domain with a guard margin kept free of verification points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartBox {
    lower: [f64; 3],
    upper: [f64; 3],
    dim: usize,
    guard: f64,
}

impl ChartBox {
    pub fn new(lower: &[f64], upper: &[f64], guard: f64) -> Result<Self> {
        if lower.len() != upper.len() || !(1..=3).contains(&lower.len()) {
            return Err(Error::InvalidArgument(
                "box bounds must have matching length 1..=3".into(),
            ));
        }
        if !(guard >= 0.0) {
            return Err(Error::InvalidArgument("guard margin must be >= 0".into()));
        }
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for (i, (&a, &b)) in lower.iter().zip(upper).enumerate() {
            if !(a < b) {
                return Err(Error::InvalidArgument(format!(
                    "box axis {i}: lower {a} must be below upper {b}"
                )));
            }
            lo[i] = a;
            hi[i] = b;
        }
        Ok(Self {
            lower: lo,
            upper: hi,
            dim: lower.len(),
            guard,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.lower[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.upper[axis]
    }

    pub fn guard(&self) -> f64 {
        self.guard
    }

    pub fn with_guard(&self, guard: f64) -> Result<Self> {
        Self::new(&self.lower[..self.dim], &self.upper[..self.dim], guard)
    }

    pub fn contains(&self, p: &ChartPoint) -> bool {
        (0..self.dim).all(|i| p.coord(i) >= self.lower[i] && p.coord(i) <= self.upper[i])
    }

    /// Distance from `p` to the nearer face along `axis`.
    pub fn clearance(&self, p: &ChartPoint, axis: usize) -> f64 {
        if axis >= self.dim {
            return f64::INFINITY;
        }
        (p.coord(axis) - self.lower[axis]).min(self.upper[axis] - p.coord(axis))
    }

    /// Midpoint of the box.
    pub fn center(&self) -> ChartPoint {
        let c: Vec<f64> = (0..self.dim)
            .map(|i| 0.5 * (self.lower[i] + self.upper[i]))
            .collect();
        ChartPoint::new(&c)
    }
}

type EvalFn = dyn Fn(&ChartPoint) -> f64 + Send + Sync;
type PartialFn = dyn Fn(&ChartPoint, &[usize]) -> Option<f64> + Send + Sync;

/// Real-valued function on a chart with optional closed-form partial derivatives.
///
/// Partials are requested by a sorted multi-index of axes, e.g. `[0, 1, 1]` for
/// the third partial once along axis 0 and twice along axis 1. `analytic_order`
/// bounds the length of multi-indices the closure is willing to answer.
/// `fd_depth` records how many derivative orders were already taken numerically
/// inside `eval`; stencil steps are chosen from the total.
#[derive(Clone)]
pub struct ScalarField {
    eval: Arc<EvalFn>,
    partials: Option<Arc<PartialFn>>,
    analytic_order: u8,
    fd_depth: u8,
    domain: Option<ChartBox>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("analytic_order", &self.analytic_order)
            .field("fd_depth", &self.fd_depth)
            .field("domain", &self.domain)
            .finish()
    }
}

impl ScalarField {
    pub fn new(f: impl Fn(&ChartPoint) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            partials: None,
            analytic_order: 0,
            fd_depth: 0,
            domain: None,
        }
    }

    /// A field whose evaluation already contains `fd_depth` numerically taken orders.
    pub fn derived(fd_depth: u8, f: impl Fn(&ChartPoint) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            fd_depth,
            ..Self::new(f)
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c).with_partials(3, |_, _| Some(0.0))
    }

    pub fn coordinate(axis: usize) -> Self {
        Self::new(move |p| p.coord(axis)).with_partials(3, move |_, axes| {
            Some(if axes == [axis] { 1.0 } else { 0.0 })
        })
    }

    /// Function of a single chart axis. `f(x)` returns the value and the first
    /// three derivatives.
    pub fn univariate(axis: usize, f: impl Fn(f64) -> [f64; 4] + Send + Sync + 'static) -> Self {
        let f = Arc::new(f);
        let g = f.clone();
        Self::new(move |p| f(p.coord(axis))[0]).with_partials(3, move |p, axes| {
            if axes.iter().any(|&a| a != axis) {
                return Some(0.0);
            }
            Some(g(p.coord(axis))[axes.len()])
        })
    }

    pub fn with_partials(
        mut self,
        order: u8,
        partials: impl Fn(&ChartPoint, &[usize]) -> Option<f64> + Send + Sync + 'static,
    ) -> Self {
        self.partials = Some(Arc::new(partials));
        self.analytic_order = order;
        self
    }

    pub fn with_domain(mut self, domain: ChartBox) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn domain(&self) -> Option<&ChartBox> {
        self.domain.as_ref()
    }

    /// Drops attached partials in [`DerivativeMode::Fd`].
    pub fn in_mode(mut self, mode: DerivativeMode) -> Self {
        if mode == DerivativeMode::Fd {
            self.partials = None;
            self.analytic_order = 0;
        }
        self
    }

    pub fn analytic_order(&self) -> u8 {
        if self.partials.is_some() {
            self.analytic_order
        } else {
            0
        }
    }

    pub fn fd_depth(&self) -> u8 {
        self.fd_depth
    }

    /// Numerical depth of a quantity that uses this field's partials up to `order`.
    pub fn depth_after(&self, order: u8) -> u8 {
        if order <= self.analytic_order() {
            self.fd_depth
        } else {
            self.fd_depth + order
        }
    }

    pub fn value(&self, p: &ChartPoint) -> Result<f64> {
        finite((self.eval)(p), p)
    }

    pub(crate) fn eval_raw(&self, p: &ChartPoint) -> f64 {
        (self.eval)(p)
    }

    /// Closed-form partial for the sorted multi-index `axes`, if attached.
    pub fn analytic(&self, p: &ChartPoint, axes: &[usize]) -> Option<f64> {
        if axes.len() > self.analytic_order as usize {
            return None;
        }
        self.partials.as_ref().and_then(|pf| pf(p, axes))
    }

    /// Pointwise sum; partials add when both sides supply them.
    pub fn sum(&self, other: &ScalarField) -> ScalarField {
        let (a, b) = (self.clone(), other.clone());
        let (pa, pb) = (self.clone(), other.clone());
        let order = self.analytic_order().min(other.analytic_order());
        let mut out = ScalarField::derived(self.fd_depth.max(other.fd_depth), move |p| {
            a.eval_raw(p) + b.eval_raw(p)
        });
        if order > 0 {
            out = out.with_partials(order, move |p, axes| {
                Some(pa.analytic(p, axes)? + pb.analytic(p, axes)?)
            });
        }
        out.domain = self.domain.or(other.domain);
        out
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        let a = self.clone();
        let pa = self.clone();
        let mut out = ScalarField::derived(self.fd_depth, move |p| c * a.eval_raw(p));
        if self.analytic_order() > 0 {
            out = out.with_partials(self.analytic_order(), move |p, axes| {
                pa.analytic(p, axes).map(|v| c * v)
            });
        }
        out.domain = self.domain;
        out
    }
}

/// Univariate function with its first three derivatives, used by [`ScalarField::compose`].
pub type Univariate = Arc<dyn Fn(f64) -> [f64; 4] + Send + Sync>;

/// Value (empty multi-index) or attached partial.
fn jet(field: &ScalarField, p: &ChartPoint, axes: &[usize]) -> Option<f64> {
    if axes.is_empty() {
        Some(field.eval_raw(p))
    } else {
        field.analytic(p, axes)
    }
}

/// Set partitions of `{0, .., n-1}` for n <= 3, each block a list of positions.
fn partitions(n: usize) -> &'static [&'static [&'static [usize]]] {
    match n {
        1 => &[&[&[0]]],
        2 => &[&[&[0, 1]], &[&[0], &[1]]],
        3 => &[
            &[&[0, 1, 2]],
            &[&[0], &[1, 2]],
            &[&[1], &[0, 2]],
            &[&[2], &[0, 1]],
            &[&[0], &[1], &[2]],
        ],
        _ => &[],
    }
}

impl ScalarField {
    /// Pointwise product; attached partials follow the Leibniz rule.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        let (a, b) = (self.clone(), other.clone());
        let (pa, pb) = (self.clone(), other.clone());
        let order = self.analytic_order().min(other.analytic_order());
        let mut out = ScalarField::derived(self.fd_depth.max(other.fd_depth), move |p| {
            a.eval_raw(p) * b.eval_raw(p)
        });
        if order > 0 {
            out = out.with_partials(order, move |p, axes| {
                let n = axes.len();
                let mut acc = 0.0;
                let mut left = Vec::with_capacity(n);
                let mut right = Vec::with_capacity(n);
                for mask in 0..(1usize << n) {
                    left.clear();
                    right.clear();
                    for (k, &ax) in axes.iter().enumerate() {
                        if mask & (1 << k) != 0 {
                            left.push(ax);
                        } else {
                            right.push(ax);
                        }
                    }
                    acc += jet(&pa, p, &left)? * jet(&pb, p, &right)?;
                }
                Some(acc)
            });
        }
        out.domain = self.domain.or(other.domain);
        out
    }

    /// `phi(self)` for a univariate `phi` given with three derivatives
    /// (partials by Faa di Bruno).
    pub fn compose(&self, phi: Univariate) -> ScalarField {
        let a = self.clone();
        let pa = self.clone();
        let f = phi.clone();
        let mut out = ScalarField::derived(self.fd_depth, move |p| f(a.eval_raw(p))[0]);
        let order = self.analytic_order();
        if order > 0 {
            out = out.with_partials(order, move |p, axes| {
                let d = phi(pa.eval_raw(p));
                let mut acc = 0.0;
                let mut block = Vec::with_capacity(3);
                for part in partitions(axes.len()) {
                    let mut term = d[part.len()];
                    for blk in part.iter() {
                        block.clear();
                        block.extend(blk.iter().map(|&k| axes[k]));
                        block.sort_unstable();
                        term *= pa.analytic(p, &block)?;
                    }
                    acc += term;
                }
                Some(acc)
            });
        }
        out.domain = self.domain;
        out
    }

    pub fn sin(&self) -> ScalarField {
        self.compose(Arc::new(|x: f64| {
            let (s, c) = x.sin_cos();
            [s, c, -s, -c]
        }))
    }

    pub fn cos(&self) -> ScalarField {
        self.compose(Arc::new(|x: f64| {
            let (s, c) = x.sin_cos();
            [c, -s, -c, s]
        }))
    }

    /// `exp(k * self)`.
    pub fn exp_scaled(&self, k: f64) -> ScalarField {
        self.compose(Arc::new(move |x: f64| {
            let e = (k * x).exp();
            [e, k * e, k * k * e, k * k * k * e]
        }))
    }

    pub fn square(&self) -> ScalarField {
        self.mul(self)
    }

    pub fn neg(&self) -> ScalarField {
        self.scaled(-1.0)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.sum(&other.neg())
    }

    /// The partial derivative along `axis` as a field. Attached partials shift down
    /// one order; without them the result is a finite difference.
    pub fn partial_field(&self, axis: usize) -> ScalarField {
        let order = self.analytic_order();
        if order >= 1 {
            let a = self.clone();
            let pa = self.clone();
            let mut out = ScalarField::derived(self.fd_depth, move |p| {
                a.analytic(p, &[axis])
                    .unwrap_or_else(|| raw_partial(&a, p, &[axis]))
            });
            if order >= 2 {
                out = out.with_partials(order - 1, move |p, axes| {
                    let mut full = Vec::with_capacity(axes.len() + 1);
                    full.extend_from_slice(axes);
                    full.push(axis);
                    full.sort_unstable();
                    pa.analytic(p, &full)
                });
            }
            out.domain = self.domain;
            out
        } else {
            let a = self.clone();
            let mut out =
                ScalarField::derived(self.fd_depth + 1, move |p| raw_partial(&a, p, &[axis]));
            out.domain = self.domain;
            out
        }
    }
}

fn finite(v: f64, p: &ChartPoint) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteValue {
            point: p.coords().to_vec(),
        })
    }
}

fn central(f: impl Fn(&ChartPoint) -> f64, p: &ChartPoint, axis: usize, h: f64) -> f64 {
    (f(&p.shifted(axis, h)) - f(&p.shifted(axis, -h))) / (2.0 * h)
}

/// Second difference along axes `a` and `b` (equal or distinct).
fn second(f: impl Fn(&ChartPoint) -> f64, p: &ChartPoint, a: usize, b: usize, h: f64) -> f64 {
    if a == b {
        (f(&p.shifted(a, h)) - 2.0 * f(p) + f(&p.shifted(a, -h))) / (h * h)
    } else {
        let pp = f(&p.shifted(a, h).shifted(b, h));
        let pm = f(&p.shifted(a, h).shifted(b, -h));
        let mp = f(&p.shifted(a, -h).shifted(b, h));
        let mm = f(&p.shifted(a, -h).shifted(b, -h));
        (pp - pm - mp + mm) / (4.0 * h * h)
    }
}

/// Partial derivative along the sorted multi-index `axes`, without guard checks.
/// Non-finite intermediate values propagate as NaN.
pub(crate) fn raw_partial(field: &ScalarField, p: &ChartPoint, axes: &[usize]) -> f64 {
    if axes.is_empty() {
        return field.eval_raw(p);
    }
    if let Some(v) = field.analytic(p, axes) {
        return v;
    }
    let depth = field.fd_depth as u32;
    match axes.len() {
        1 => central(|q| field.eval_raw(q), p, axes[0], fd_step(depth + 1)),
        2 => {
            let (a, b) = (axes[0], axes[1]);
            if field.analytic_order() >= 1 {
                return central(|q| raw_partial(field, q, &[b]), p, a, fd_step(depth + 1));
            }
            second(|q| field.eval_raw(q), p, a, b, fd_step(depth + 2))
        }
        3 => {
            let h = fd_step(depth + 3);
            if field.analytic_order() >= 2 {
                return central(|q| raw_partial(field, q, &axes[1..]), p, axes[0], h);
            }
            let c = axes[2];
            let inner = |q: &ChartPoint| match field.analytic(q, &[c]) {
                Some(v) => v,
                None => central(|r| field.eval_raw(r), q, c, h),
            };
            second(inner, p, axes[0], axes[1], h)
        }
        _ => f64::NAN,
    }
}

fn check_guard(field: &ScalarField, p: &ChartPoint, axes: &[usize]) -> Result<()> {
    let Some(domain) = field.domain() else {
        return Ok(());
    };
    let order = axes.len() as u32;
    let reach = order as f64 * fd_step(field.fd_depth as u32 + order);
    let inside = domain.contains(p);
    if !inside || axes.iter().any(|&a| domain.clearance(p, a) < reach) {
        return Err(Error::PointOutsideGuard {
            point: p.coords().to_vec(),
            reach,
        });
    }
    Ok(())
}

/// Mixed partial derivative along `axes` (any order, at most three entries).
pub fn partial(field: &ScalarField, p: &ChartPoint, axes: &[usize]) -> Result<f64> {
    if axes.len() > 3 {
        return Err(Error::InvalidArgument(
            "partials above third order are not supported".into(),
        ));
    }
    let mut sorted = axes.to_vec();
    sorted.sort_unstable();
    check_guard(field, p, &sorted)?;
    finite(raw_partial(field, p, &sorted), p)
}

/// `order`-th partial derivative of `field` along a single `axis`.
pub fn partial_derivative(
    field: &ScalarField,
    point: &ChartPoint,
    axis: usize,
    order: usize,
) -> Result<f64> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidArgument(format!(
            "derivative order {order} not in 1..=3"
        )));
    }
    partial(field, point, &vec![axis; order])
}

/// Directional derivative `sum_i comp_i(p) * d field / dx_i (p)`.
pub fn frame_derivative(
    components: &[ScalarField],
    field: &ScalarField,
    point: &ChartPoint,
) -> Result<f64> {
    if components.len() != point.dim() {
        return Err(Error::InvalidArgument(format!(
            "{} vector components for a {}-dimensional chart",
            components.len(),
            point.dim()
        )));
    }
    let mut acc = 0.0;
    for (axis, comp) in components.iter().enumerate() {
        let c = comp.value(point)?;
        if c != 0.0 {
            acc += c * partial(field, point, &[axis])?;
        }
    }
    Ok(acc)
}

/// The directional derivative of `field` as a field in its own right. Partials are
/// attached when the components and the first partials of `field` carry them.
pub fn frame_derivative_field(components: &[ScalarField], field: &ScalarField) -> ScalarField {
    let terms: Vec<ScalarField> = components
        .iter()
        .enumerate()
        .map(|(axis, c)| c.mul(&field.partial_field(axis)))
        .collect();
    let comps = components.to_vec();
    let f = field.clone();
    let depth = terms.iter().map(|t| t.fd_depth).max().unwrap_or(0);
    let mut out = ScalarField::derived(depth, move |p| {
        comps
            .iter()
            .enumerate()
            .map(|(axis, c)| {
                let cv = c.eval_raw(p);
                if cv == 0.0 {
                    0.0
                } else {
                    cv * f
                        .analytic(p, &[axis])
                        .unwrap_or_else(|| raw_partial(&f, p, &[axis]))
                }
            })
            .sum()
    });
    let order = terms.iter().map(|t| t.analytic_order()).min().unwrap_or(0);
    if order > 0 {
        out = out.with_partials(order, move |p, axes| {
            terms.iter().map(|t| t.analytic(p, axes)).sum()
        });
    }
    out.domain = field.domain;
    out
}

/// Uniform grid over the guarded interior of `bx`, row-major (first axis slowest).
pub fn sample_grid(bx: &ChartBox, counts: &[usize]) -> Result<Vec<ChartPoint>> {
    if counts.len() != bx.dim() {
        return Err(Error::InvalidArgument(format!(
            "{} grid counts for a {}-dimensional box",
            counts.len(),
            bx.dim()
        )));
    }
    if counts.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument("grid counts must be >= 2".into()));
    }
    let mut axes = Vec::with_capacity(bx.dim());
    for (i, &n) in counts.iter().enumerate() {
        let lo = bx.lower(i) + bx.guard();
        let hi = bx.upper(i) - bx.guard();
        if !(lo < hi) {
            return Err(Error::DegenerateBox);
        }
        let nodes: Vec<f64> = (0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect();
        axes.push(nodes);
    }
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; counts.len()];
    for _ in 0..total {
        let c: Vec<f64> = idx.iter().enumerate().map(|(i, &k)| axes[i][k]).collect();
        out.push(ChartPoint::new(&c));
        for i in (0..counts.len()).rev() {
            idx[i] += 1;
            if idx[i] < counts[i] {
                break;
            }
            idx[i] = 0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square() -> ScalarField {
        ScalarField::new(|p| p.coord(1) * p.coord(1))
    }

    #[test]
    fn polynomial_derivatives() {
        let p = ChartPoint::xyz(0.0, 2.0, 0.0);
        let d1 = partial_derivative(&square(), &p, 1, 1).unwrap();
        let d2 = partial_derivative(&square(), &p, 1, 2).unwrap();
        assert!((d1 - 4.0).abs() < 1e-8);
        assert!((d2 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn third_derivative_of_sine() {
        let fd = ScalarField::new(|p| p.coord(0).sin());
        let an = ScalarField::univariate(0, |x| [x.sin(), x.cos(), -x.sin(), -x.cos()]);
        let p = ChartPoint::new(&[0.0]);
        // -cos(0)
        assert!((partial_derivative(&fd, &p, 0, 3).unwrap() + 1.0).abs() < 1e-4);
        assert!((partial_derivative(&an, &p, 0, 3).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn directional_derivatives() {
        let cube = ScalarField::new(|p| p.coord(1).powi(3));
        let e2 = [
            ScalarField::constant(0.0),
            ScalarField::constant(1.0),
            ScalarField::constant(0.0),
        ];
        let p = ChartPoint::xyz(0.3, 1.0, 0.0);
        assert!((frame_derivative(&e2, &cube, &p).unwrap() - 3.0).abs() < 1e-7);

        // e^{-q} d/dt with q = 0 applied to t
        let e1 = [
            ScalarField::new(|_| (-0.0f64).exp()),
            ScalarField::constant(0.0),
            ScalarField::constant(0.0),
        ];
        let t = ScalarField::coordinate(0);
        assert_eq!(frame_derivative(&e1, &t, &p).unwrap(), 1.0);

        // f = q_s for q = ln sin s is cot s; d/ds cot s = -csc^2 s = -1 at pi/2
        let f = ScalarField::new(|p| p.coord(1).cos() / p.coord(1).sin());
        let p = ChartPoint::xyz(0.0, std::f64::consts::FRAC_PI_2, 0.0);
        assert!((frame_derivative(&e2, &f, &p).unwrap() + 1.0).abs() < 1e-8);
    }

    #[test]
    fn frame_derivative_rejects_wrong_arity() {
        let p = ChartPoint::xyz(0.0, 0.0, 0.0);
        let err = frame_derivative(&[ScalarField::constant(1.0)], &square(), &p).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn nested_frame_derivative_is_second_derivative() {
        let e2 = [
            ScalarField::constant(0.0),
            ScalarField::constant(1.0),
            ScalarField::constant(0.0),
        ];
        let sin = ScalarField::new(|p| p.coord(1).sin());
        let d = frame_derivative_field(&e2, &sin);
        let p = ChartPoint::xyz(0.0, 0.4, 0.0);
        let dd = frame_derivative(&e2, &d, &p).unwrap();
        assert!((dd + 0.4f64.sin()).abs() < 1e-6);
    }

    #[test]
    fn guard_and_finiteness_errors() {
        let bx = ChartBox::new(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap();
        let f = ScalarField::new(|p| p.coord(0)).with_domain(bx);
        let edge = ChartPoint::xy(0.0, 0.5);
        assert!(matches!(
            partial_derivative(&f, &edge, 0, 1),
            Err(Error::PointOutsideGuard { .. })
        ));
        // the stencil only reaches along the differentiated axis
        assert!(partial_derivative(&f, &edge, 1, 1).is_ok());

        let bad = ScalarField::new(|p| 1.0 / p.coord(0));
        assert!(matches!(
            partial_derivative(&bad, &ChartPoint::new(&[0.0]), 0, 2),
            Err(Error::NonFiniteValue { .. })
        ));
        assert!(partial_derivative(&square(), &edge, 0, 4).is_err());
    }

    #[test]
    fn grid_sampling() {
        let bx = ChartBox::new(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap();
        let pts = sample_grid(&bx, &[2, 2]).unwrap();
        let got: Vec<Vec<f64>> = pts.iter().map(|p| p.coords().to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![0.1, 0.1],
                vec![0.1, 0.9],
                vec![0.9, 0.1],
                vec![0.9, 0.9]
            ]
        );

        let line = ChartBox::new(&[0.0], &[1.0], 0.0).unwrap();
        let got: Vec<f64> = sample_grid(&line, &[3])
            .unwrap()
            .iter()
            .map(|p| p.coord(0))
            .collect();
        assert_eq!(got, vec![0.0, 0.5, 1.0]);

        let bx = ChartBox::new(&[0.0, 0.2], &[std::f64::consts::PI, 1.4], 0.05).unwrap();
        let pts = sample_grid(&bx, &[5, 5]).unwrap();
        assert_eq!(pts.len(), 25);
        let min_s = pts.iter().map(|p| p.coord(1)).fold(f64::INFINITY, f64::min);
        assert!((min_s - 0.25).abs() < 1e-15);

        let thin = ChartBox::new(&[0.0], &[0.1], 0.05).unwrap();
        assert_eq!(sample_grid(&thin, &[3]), Err(Error::DegenerateBox));
        assert!(sample_grid(&line, &[1]).is_err());
    }

    #[test]
    fn fd_error_is_second_order() {
        // |FD - analytic| <= C h^2 for smooth fields
        type Exact = Box<dyn Fn(f64) -> [f64; 4]>;
        let fields: Vec<(ScalarField, Exact)> = vec![
            (
                ScalarField::new(|p| p.coord(0).sin()),
                Box::new(|x: f64| [x.sin(), x.cos(), -x.sin(), -x.cos()]),
            ),
            (
                ScalarField::new(|p| p.coord(0).exp()),
                Box::new(|x: f64| [x.exp(); 4]),
            ),
            (
                ScalarField::new(|p| p.coord(0).powi(3) - 2.0 * p.coord(0)),
                Box::new(|x: f64| [x.powi(3) - 2.0 * x, 3.0 * x * x - 2.0, 6.0 * x, 6.0]),
            ),
        ];
        for (field, exact) in &fields {
            for &x in &[-0.7, 0.1, 0.9] {
                let p = ChartPoint::new(&[x]);
                let e = exact(x);
                for order in 1..=3 {
                    let h = fd_step(order as u32);
                    let got = partial_derivative(field, &p, 0, order).unwrap();
                    assert!(
                        (got - e[order]).abs() <= 10.0 * h * h + 1e-6,
                        "order {order} at {x}: {got} vs {}",
                        e[order]
                    );
                }
            }
        }
    }

    #[test]
    fn combinators_match_finite_differences() {
        let x = ScalarField::coordinate(0);
        let y = ScalarField::coordinate(1);
        let f = x
            .mul(&y)
            .sin()
            .mul(&y.exp_scaled(0.5))
            .sum(&x.square().cos());
        assert_eq!(f.analytic_order(), 3);
        let fd = f.clone().in_mode(DerivativeMode::Fd);
        let p = ChartPoint::xy(0.3, -0.4);
        for axes in [
            vec![0],
            vec![1],
            vec![0, 1],
            vec![1, 1],
            vec![0, 0, 1],
            vec![1, 1, 1],
        ] {
            let a = partial(&f, &p, &axes).unwrap();
            let n = partial(&fd, &p, &axes).unwrap();
            assert!((a - n).abs() < 1e-5, "{axes:?}: {a} vs {n}");
        }
        let fy = f.partial_field(1);
        assert_eq!(fy.analytic_order(), 2);
        let a = partial(&fy, &p, &[0, 1]).unwrap();
        assert!((a - partial(&f, &p, &[0, 1, 1]).unwrap()).abs() < 1e-14);
        let fyn = fd.partial_field(1);
        assert_eq!(fyn.fd_depth(), 1);
        assert!((partial(&fyn, &p, &[0, 1]).unwrap() - a).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn frame_derivative_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0,
                                      x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let f = ScalarField::new(|p| (p.coord(0) * p.coord(1)).sin());
            let g = ScalarField::new(|p| p.coord(0).exp() + p.coord(1).powi(2));
            let comb = f.scaled(a).sum(&g.scaled(b));
            let e = [ScalarField::new(|p| p.coord(1).cos()), ScalarField::new(|p| 1.0 + p.coord(0))];
            let p = ChartPoint::xy(x, y);
            let lhs = frame_derivative(&e, &comb, &p).unwrap();
            let rhs = a * frame_derivative(&e, &f, &p).unwrap() + b * frame_derivative(&e, &g, &p).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn mixed_partials_commute(x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let f = ScalarField::new(|p| (p.coord(0) * p.coord(1)).sin() + p.coord(0).powi(2) * p.coord(1));
            let p = ChartPoint::xy(x, y);
            // d_t d_s through nesting versus the direct stencil
            let e_t = [ScalarField::constant(1.0), ScalarField::constant(0.0)];
            let e_s = [ScalarField::constant(0.0), ScalarField::constant(1.0)];
            let ts = frame_derivative(&e_t, &frame_derivative_field(&e_s, &f), &p).unwrap();
            let st = frame_derivative(&e_s, &frame_derivative_field(&e_t, &f), &p).unwrap();
            let direct = partial(&f, &p, &[0, 1]).unwrap();
            prop_assert!((ts - st).abs() < 1e-6);
            prop_assert!((ts - direct).abs() < 1e-6);
        }
    }
}
