//! Graphons: symmetric bounded functions on the open unit square, carrying
//! Hölder metadata and bounds, plus a small built-in catalog.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::StepGraphon;

/// Declared Hölder class: `|f(x,y) - f(x',y')| <= m |(x,y) - (x',y')|^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Holder {
    pub alpha: f64,
    pub m: f64,
}

impl Holder {
    pub fn new(alpha: f64, m: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) || !(m >= 0.0) || !m.is_finite() {
            return Err(Error::domain(format!("Hölder class needs alpha in (0,1], M >= 0; got ({alpha}, {m})")));
        }
        Ok(Holder { alpha, m })
    }

    /// Sup-norm envelope `M (sqrt(2) max_a h_a / n)^alpha` for a step approximation.
    pub fn step_envelope(&self, max_size: usize, n: usize) -> f64 {
        self.m * (SQRT_2 * max_size as f64 / n as f64).powf(self.alpha)
    }
}

/// Metadata attached to a graphon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphonProps {
    pub holder: Option<Holder>,
    /// Infimum of `f` over the open square.
    pub lower_bound: f64,
    /// Supremum of `f` over the open square.
    pub upper_bound: f64,
    /// Whether `f` integrates to one.
    pub mean_one: bool,
}

type EvalFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct Graphon {
    name: String,
    eval: Arc<EvalFn>,
    props: GraphonProps,
}

impl fmt::Debug for Graphon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graphon").field("name", &self.name).field("props", &self.props).finish()
    }
}

/// Names accepted by [`Graphon::by_name`].
pub const CATALOG: &[&str] = &["constant", "bilinear", "product", "cosine", "step"];

impl Graphon {
    pub fn custom<F>(name: impl Into<String>, props: GraphonProps, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(props.lower_bound >= 0.0) || !(props.upper_bound >= props.lower_bound) || !props.upper_bound.is_finite() {
            return Err(Error::domain(format!(
                "graphon bounds must satisfy 0 <= lower <= upper < inf, got [{}, {}]",
                props.lower_bound, props.upper_bound
            )));
        }
        Ok(Graphon { name: name.into(), eval: Arc::new(f), props })
    }

    /// Looks up a built-in graphon. `smooth-cosine` is accepted as an alias
    /// for `cosine`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "constant" => Ok(Self::constant(1.0)),
            "bilinear" => Ok(Self::bilinear()),
            "product" => Ok(Self::product()),
            "cosine" | "smooth-cosine" => Ok(Self::cosine()),
            "step" => Ok(Self::two_block_step()),
            other => Err(Error::config(format!("unknown graphon '{other}' (known: {})", CATALOG.join(", ")))),
        }
    }

    /// `f = c`. Mean one only when `c = 1`.
    pub fn constant(c: f64) -> Self {
        let props = GraphonProps {
            holder: Some(Holder { alpha: 1.0, m: 0.0 }),
            lower_bound: c,
            upper_bound: c,
            mean_one: c == 1.0,
        };
        Graphon::custom("constant", props, move |_, _| c).expect("constant graphon")
    }

    /// `f = 1/2 + (x + y)/2`, mean one, Lipschitz with `M = sqrt(2)/2`.
    pub fn bilinear() -> Self {
        let props = GraphonProps {
            holder: Some(Holder { alpha: 1.0, m: SQRT_2 / 2.0 }),
            lower_bound: 0.5,
            upper_bound: 1.5,
            mean_one: true,
        };
        Graphon::custom("bilinear", props, |x, y| 0.5 + 0.5 * (x + y)).unwrap()
    }

    /// `f = 4xy`, mean one, Lipschitz with `M = 4 sqrt(2)`. Not bounded away
    /// from zero.
    pub fn product() -> Self {
        let props = GraphonProps {
            holder: Some(Holder { alpha: 1.0, m: 4.0 * SQRT_2 }),
            lower_bound: 0.0,
            upper_bound: 4.0,
            mean_one: true,
        };
        Graphon::custom("product", props, |x, y| 4.0 * x * y).unwrap()
    }

    /// `f = 1 + cos(2 pi x) cos(2 pi y) / 2`, mean one, Lipschitz with `M = pi`.
    pub fn cosine() -> Self {
        let props = GraphonProps {
            holder: Some(Holder { alpha: 1.0, m: PI }),
            lower_bound: 0.5,
            upper_bound: 1.5,
            mean_one: true,
        };
        Graphon::custom("cosine", props, |x, y| 1.0 + 0.5 * (2.0 * PI * x).cos() * (2.0 * PI * y).cos()).unwrap()
    }

    /// Two equal blocks with heights 1.6 inside and 0.4 across; mean one.
    pub fn two_block_step() -> Self {
        Self::step_function("step", vec![0.5], vec![vec![1.6, 0.4], vec![0.4, 1.6]]).unwrap()
    }

    /// Step graphon with interior cut points `breaks` (strictly increasing in
    /// `(0,1)`) and a symmetric matrix of block heights.
    pub fn step_function(name: impl Into<String>, breaks: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let k = breaks.len() + 1;
        if values.len() != k || values.iter().any(|r| r.len() != k) {
            return Err(Error::domain(format!("step graphon needs a {k}x{k} value matrix")));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) || breaks.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::domain("step breaks must increase strictly inside (0,1)"));
        }
        for a in 0..k {
            for b in 0..k {
                if values[a][b] != values[b][a] || !(values[a][b] >= 0.0) {
                    return Err(Error::domain("step values must be symmetric and nonnegative"));
                }
            }
        }
        let mut bounds = (f64::INFINITY, 0.0f64);
        let mut mean = 0.0;
        let edges: Vec<f64> = std::iter::once(0.0).chain(breaks.iter().copied()).chain(std::iter::once(1.0)).collect();
        for a in 0..k {
            for b in 0..k {
                bounds.0 = bounds.0.min(values[a][b]);
                bounds.1 = bounds.1.max(values[a][b]);
                mean += values[a][b] * (edges[a + 1] - edges[a]) * (edges[b + 1] - edges[b]);
            }
        }
        let props = GraphonProps {
            holder: None,
            lower_bound: bounds.0,
            upper_bound: bounds.1,
            mean_one: (mean - 1.0).abs() < 1e-12,
        };
        let locate = move |x: f64| breaks.partition_point(|&b| b <= x);
        Graphon::custom(name, props, move |x, y| values[locate(x)][locate(y)])
    }

    /// Wraps a fitted or exact step graphon as a graphon.
    pub fn from_step(step: &StepGraphon) -> Self {
        let values = step.values();
        let (lo, hi) = values
            .iter()
            .flatten()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let mean = step.integral();
        let props = GraphonProps {
            holder: None,
            lower_bound: lo,
            upper_bound: hi,
            mean_one: (mean - 1.0).abs() < 1e-12,
        };
        let s = step.clone();
        Graphon::custom("stepgraphon", props, move |x, y| s.eval(x, y)).unwrap()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn props(&self) -> &GraphonProps {
        &self.props
    }

    pub fn holder(&self) -> Option<Holder> {
        self.props.holder
    }

    pub fn upper_bound(&self) -> f64 {
        self.props.upper_bound
    }

    pub fn lower_bound(&self) -> f64 {
        self.props.lower_bound
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.eval)(x, y)
    }

    /// Midpoint Riemann sum of `f` on an `m x m` grid.
    pub fn riemann_mean(&self, m: usize) -> f64 {
        let pts = midpoints(m);
        let mut sum = 0.0;
        for &x in &pts {
            for &y in &pts {
                sum += self.eval(x, y);
            }
        }
        sum / (m * m) as f64
    }

    /// Largest `|f(x,y) - f(y,x)|` over grid midpoints.
    pub fn symmetry_defect(&self, grid: usize) -> f64 {
        let pts = midpoints(grid);
        let mut worst = 0.0f64;
        for (i, &x) in pts.iter().enumerate() {
            for &y in &pts[i..] {
                worst = worst.max((self.eval(x, y) - self.eval(y, x)).abs());
            }
        }
        worst
    }

    /// True when every grid midpoint value lies within the declared bounds.
    pub fn bounds_hold(&self, grid: usize) -> bool {
        let pts = midpoints(grid);
        let GraphonProps { lower_bound, upper_bound, .. } = self.props;
        pts.iter()
            .all(|&x| pts.iter().all(|&y| (lower_bound..=upper_bound).contains(&self.eval(x, y))))
    }
}

/// Grid midpoints `(i - 1/2) / m`, `i = 1..=m`; endpoints of the square are
/// never evaluated.
pub fn midpoints(m: usize) -> Vec<f64> {
    (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_resolves() {
        for name in CATALOG {
            let g = Graphon::by_name(name).unwrap();
            assert!(g.props().mean_one, "{name}");
        }
        assert!(matches!(Graphon::by_name("nope"), Err(Error::Config(_))));
        assert_eq!(Graphon::by_name("smooth-cosine").unwrap().name(), "cosine");
    }

    #[test]
    fn builtins_are_symmetric_and_bounded() {
        for name in CATALOG {
            let g = Graphon::by_name(name).unwrap();
            assert!(g.symmetry_defect(64) == 0.0, "{name}");
            assert!(g.bounds_hold(64), "{name}");
        }
    }

    #[test]
    fn mean_one_riemann_error_shrinks() {
        for name in CATALOG {
            let g = Graphon::by_name(name).unwrap();
            for m in [16, 64, 256] {
                let err = (g.riemann_mean(m) - 1.0).abs();
                assert!(err <= 1.0 / m as f64, "{name} m={m} err={err}");
            }
        }
    }

    #[test]
    fn step_function_lookup() {
        let g = Graphon::two_block_step();
        assert_eq!(g.eval(0.1, 0.2), 1.6);
        assert_eq!(g.eval(0.1, 0.7), 0.4);
        assert_eq!(g.eval(0.9, 0.7), 1.6);
        assert!(g.holder().is_none());
        assert!(Graphon::step_function("bad", vec![0.5], vec![vec![1.0, 0.2], vec![0.3, 1.0]]).is_err());
        assert!(Graphon::step_function("bad", vec![0.6, 0.4], vec![vec![1.0; 3]; 3]).is_err());
    }

    #[test]
    fn envelope_formula() {
        let h = Holder::new(1.0, SQRT_2 / 2.0).unwrap();
        assert!((h.step_envelope(25, 100) - 0.25).abs() < 1e-15);
        assert!(Holder::new(0.0, 1.0).is_err());
        assert!(Holder::new(1.5, 1.0).is_err());
    }
}
