//! Agent payoff functions `u(yhat, y)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Catalog of agent utilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilitySpec {
    /// `u = yhat`.
    Linear,
    /// `u = -(yhat - y)^2`.
    SquaredError,
    /// Evaluator best-responds with `a = yhat` under the shared payoff `-(a - y)^2`.
    ActionModel,
    /// `u = phi(yhat)` from a parametric family with known curvature constants.
    Phi(PhiFamily),
    /// Bilinear interpolation of a user table over a `(yhat, y)` grid.
    Table(UtilityTable),
}

/// Smooth ŷ-only utilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum PhiFamily {
    /// `phi(y) = curvature * y^2 + slope * y`.
    Quadratic { curvature: f64, slope: f64 },
    /// `phi(y) = exp(rate * y)`; convex for any nonzero rate.
    Exponential { rate: f64 },
    /// `phi(y) = -exp(-rate * y)`; concave for any nonzero rate.
    Cara { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    StrictlyConvex,
    StrictlyConcave,
    Linear,
}

/// `c1 = inf |phi''|`, `c2 = sup |phi'|` on `[-ybar, ybar]`, and `C = 2 c2 / c1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiConstants {
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
}

impl PhiConstants {
    /// Lipschitz constant of `phi` on the type range.
    pub fn lipschitz(&self) -> f64 {
        self.c2
    }
}

impl PhiFamily {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            PhiFamily::Quadratic { curvature, slope } => curvature * y * y + slope * y,
            PhiFamily::Exponential { rate } => (rate * y).exp(),
            PhiFamily::Cara { rate } => -(-rate * y).exp(),
        }
    }

    pub fn curvature(&self) -> Curvature {
        let sign = match *self {
            PhiFamily::Quadratic { curvature, .. } => curvature,
            PhiFamily::Exponential { rate } => rate * rate,
            PhiFamily::Cara { rate } => -(rate * rate),
        };
        if sign > 0.0 {
            Curvature::StrictlyConvex
        } else if sign < 0.0 {
            Curvature::StrictlyConcave
        } else {
            Curvature::Linear
        }
    }

    /// Analytic curvature constants on `[-ybar, ybar]`.
    pub fn constants(&self, ybar: f64) -> PhiConstants {
        let (c1, c2) = match *self {
            PhiFamily::Quadratic { curvature, slope } => {
                (2.0 * curvature.abs(), 2.0 * curvature.abs() * ybar + slope.abs())
            }
            PhiFamily::Exponential { rate } | PhiFamily::Cara { rate } => {
                let r = rate.abs();
                (r * r * (-r * ybar).exp(), r * (r * ybar).exp())
            }
        };
        let c = if c1 > 0.0 { 2.0 * c2 / c1 } else { f64::INFINITY };
        PhiConstants { c1, c2, c }
    }

    /// Requires strictly positive curvature on the type range.
    pub fn validate(&self, ybar: f64) -> Result<PhiConstants> {
        let k = self.constants(ybar);
        if !(k.c1 > 0.0 && k.c.is_finite()) {
            return Err(Error::UnsupportedUtility(format!(
                "{self} has c1 = {} on [-{ybar}, {ybar}]; a positive curvature bound is required",
                k.c1
            )));
        }
        Ok(k)
    }

    fn critical_points(&self) -> Vec<f64> {
        match *self {
            PhiFamily::Quadratic { curvature, slope } if curvature != 0.0 => {
                vec![-slope / (2.0 * curvature)]
            }
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for PhiFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiFamily::Quadratic { curvature, slope } => {
                write!(f, "phi_quadratic[a={curvature};b={slope}]")
            }
            PhiFamily::Exponential { rate } => write!(f, "phi_exp[r={rate}]"),
            PhiFamily::Cara { rate } => write!(f, "phi_cara[r={rate}]"),
        }
    }
}

/// Grid utility. `values[i * y_grid.len() + j]` is `u(yhat_grid[i], y_grid[j])`.
/// A single-point `y_grid` makes the utility depend on `yhat` alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityTable {
    pub yhat_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl UtilityTable {
    pub fn validate(&self) -> Result<()> {
        let increasing = |g: &[f64]| !g.is_empty() && g.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.yhat_grid) || !increasing(&self.y_grid) {
            return Err(Error::Config("utility table grids must be nonempty and strictly increasing".into()));
        }
        if self.values.len() != self.yhat_grid.len() * self.y_grid.len() {
            return Err(Error::Config(format!(
                "utility table needs {} values, got {}",
                self.yhat_grid.len() * self.y_grid.len(),
                self.values.len()
            )));
        }
        Ok(())
    }

    fn eval(&self, yhat: f64, y: f64) -> f64 {
        let (i0, i1, ti) = bracket(&self.yhat_grid, yhat);
        let (j0, j1, tj) = bracket(&self.y_grid, y);
        let w = self.y_grid.len();
        let v = |i: usize, j: usize| self.values[i * w + j];
        let lo = v(i0, j0) * (1.0 - tj) + v(i0, j1) * tj;
        let hi = v(i1, j0) * (1.0 - tj) + v(i1, j1) * tj;
        lo * (1.0 - ti) + hi * ti
    }
}

/// Clamped linear-interpolation bracket.
fn bracket(grid: &[f64], t: f64) -> (usize, usize, f64) {
    let last = grid.len() - 1;
    if last == 0 || t <= grid[0] {
        return (0, 0, 0.0);
    }
    if t >= grid[last] {
        return (last, last, 0.0);
    }
    let hi = grid.partition_point(|&g| g <= t);
    let lo = hi - 1;
    (lo, hi, (t - grid[lo]) / (grid[hi] - grid[lo]))
}

impl UtilitySpec {
    pub fn eval(&self, yhat: f64, y: f64) -> f64 {
        match self {
            UtilitySpec::Linear => yhat,
            UtilitySpec::SquaredError | UtilitySpec::ActionModel => -(yhat - y) * (yhat - y),
            UtilitySpec::Phi(phi) => phi.eval(yhat),
            UtilitySpec::Table(t) => t.eval(yhat, y),
        }
    }

    /// Whether the payoff depends on the realized type rather than on `yhat` alone.
    pub fn depends_on_type(&self) -> bool {
        match self {
            UtilitySpec::Linear | UtilitySpec::Phi(_) => false,
            UtilitySpec::SquaredError | UtilitySpec::ActionModel => true,
            UtilitySpec::Table(t) => t.y_grid.len() > 1,
        }
    }

    pub fn validate(&self, ybar: f64) -> Result<()> {
        match self {
            UtilitySpec::Phi(phi) => phi.validate(ybar).map(|_| ()),
            UtilitySpec::Table(t) => t.validate(),
            _ => Ok(()),
        }
    }

    /// Minimum of a ŷ-only utility over `[lo, hi]`, with a minimizer.
    /// Candidates are the endpoints plus the catalog entry's interior critical points.
    pub fn min_over_interval(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        if self.depends_on_type() {
            return Err(Error::UnsupportedUtility(format!(
                "{self} depends on the realized type; a yhat-only utility is required"
            )));
        }
        let mut candidates = vec![lo, hi];
        match self {
            UtilitySpec::Phi(phi) => candidates.extend(phi.critical_points()),
            UtilitySpec::Table(t) => candidates.extend(t.yhat_grid.iter().copied()),
            _ => {}
        }
        let mut best = (f64::INFINITY, lo);
        for c in candidates.into_iter().filter(|c| *c >= lo && *c <= hi) {
            let v = self.eval(c, 0.0);
            if v < best.0 || (v == best.0 && c < best.1) {
                best = (v, c);
            }
        }
        Ok(best)
    }

    /// Short label used in result rows; contains no commas.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for UtilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilitySpec::Linear => write!(f, "linear"),
            UtilitySpec::SquaredError => write!(f, "squared_error"),
            UtilitySpec::ActionModel => write!(f, "action_model"),
            UtilitySpec::Phi(phi) => write!(f, "{phi}"),
            UtilitySpec::Table(t) => write!(f, "table[{}x{}]", t.yhat_grid.len(), t.y_grid.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_constants() {
        let phi = PhiFamily::Quadratic { curvature: 1.0, slope: 0.0 };
        let k = phi.constants(1.0);
        assert_eq!((k.c1, k.c2, k.c), (2.0, 2.0, 2.0));
        assert_eq!(phi.curvature(), Curvature::StrictlyConvex);
        let neg = PhiFamily::Quadratic { curvature: -1.0, slope: 0.0 };
        assert_eq!(neg.curvature(), Curvature::StrictlyConcave);
        assert_eq!(neg.constants(1.0).c, 2.0);
    }

    #[test]
    fn squared_loss_action_model_is_the_convex_quadratic_for_binary_types() {
        // E[-(yhat - Y)^2] with Y ~ Bernoulli(yhat) equals yhat^2 - yhat.
        let phi = PhiFamily::Quadratic { curvature: 1.0, slope: -1.0 };
        for yhat in [0.0, 0.2, 0.5, 0.9] {
            let u = UtilitySpec::ActionModel;
            let expected = yhat * u.eval(yhat, 1.0) + (1.0 - yhat) * u.eval(yhat, 0.0);
            assert!((phi.eval(yhat) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_families() {
        let e = PhiFamily::Exponential { rate: 2.0 };
        let k = e.constants(1.0);
        assert!((k.c1 - 4.0 * (-2.0f64).exp()).abs() < 1e-12);
        assert!((k.c2 - 2.0 * 2.0f64.exp()).abs() < 1e-12);
        assert_eq!(PhiFamily::Cara { rate: 1.5 }.curvature(), Curvature::StrictlyConcave);
    }

    #[test]
    fn linear_phi_is_rejected() {
        let flat = PhiFamily::Quadratic { curvature: 0.0, slope: 1.0 };
        assert!(flat.validate(1.0).is_err());
    }

    #[test]
    fn interval_minimum_uses_critical_points() {
        let u = UtilitySpec::Phi(PhiFamily::Quadratic { curvature: 1.0, slope: 0.0 });
        assert_eq!(u.min_over_interval(-0.5, 1.0).unwrap(), (0.0, 0.0));
        assert_eq!(UtilitySpec::Linear.min_over_interval(-0.5, 1.0).unwrap(), (-0.5, -0.5));
        assert!(UtilitySpec::SquaredError.min_over_interval(0.0, 1.0).is_err());
    }

    #[test]
    fn table_interpolates_bilinearly() {
        let t = UtilityTable {
            yhat_grid: vec![0.0, 1.0],
            y_grid: vec![0.0, 1.0],
            values: vec![0.0, 1.0, 2.0, 3.0],
        };
        t.validate().unwrap();
        let u = UtilitySpec::Table(t);
        assert!((u.eval(0.5, 0.5) - 1.5).abs() < 1e-12);
        assert_eq!(u.eval(-3.0, 5.0), 1.0);
        assert!(u.depends_on_type());
    }

    #[test]
    fn serde_round_trip() {
        let u = UtilitySpec::Phi(PhiFamily::Quadratic { curvature: -1.0, slope: 0.0 });
        let text = toml::to_string(&u).unwrap();
        let back: UtilitySpec = toml::from_str(&text).unwrap();
        assert_eq!(back, u);
        let lin: UtilitySpec = toml::from_str("kind = \"linear\"").unwrap();
        assert_eq!(lin, UtilitySpec::Linear);
    }
}
