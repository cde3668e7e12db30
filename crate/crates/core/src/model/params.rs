use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Tolerance used when deciding whether a lateral leaf is fixed by `f`.
pub const CASE_TOL: f64 = 1e-12;

/// Which lateral leaf (if any) is fixed by the one-dimensional map.
///
/// * `A`: `f(L-) > L-` and `f(L+) = L+`
/// * `B`: `f(L-) = L-` and `f(L+) < L+`
/// * `C`: `f(L-) > L-` and `f(L+) < L+`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    A,
    B,
    C,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::A, Case::B, Case::C];
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Case::A => "A",
            Case::B => "B",
            Case::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Case::A),
            "B" | "b" => Ok(Case::B),
            "C" | "c" => Ok(Case::C),
            other => Err(Error::Config(format!("unknown case `{other}` (expected A, B or C)"))),
        }
    }
}

/// Everything that fixes one concrete geometric Lorenz flow.
///
/// The flow is linear inside the unit cube, `(x, y, z)' = (l1 x, l2 y, l3 z)`,
/// and returns to the cross-section `S = {|x|, |y| <= 1/2, z = 1}` through two
/// constant-time tubes whose landing points realize
/// `P(x, y) = (f(x), g(x, y))` with
///
/// ```text
/// f(x) = c+ x^r - 1/2        (x > 0)
/// f(x) = 1/2 - c- |x|^r      (x < 0)
/// g(x, y) = kappa |x|^s y
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub delta_rep: f64,
    pub case: Case,
}

/// Outcome of a single model property check.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl ModelParams {
    pub const TUBE_TIME: f64 = 1.0;
    pub const DEFAULT_LAMBDA: (f64, f64, f64) = (1.0, -2.0, -0.75);
    pub const DEFAULT_KAPPA: f64 = 0.5;
    pub const DEFAULT_STRICT_C: f64 = 1.63;
    pub const DEFAULT_DELTA_REP: f64 = 0.1;

    /// Default parameters for `case`, with gamma chosen automatically.
    pub fn for_case(case: Case) -> Self {
        let base = Self::for_case_without_gamma(case);
        base.with_auto_gamma()
            .expect("default parameters admit a gamma")
    }

    /// Default parameters for `case` with `gamma` left at zero.
    pub fn for_case_without_gamma(case: Case) -> Self {
        let (l1, l2, l3) = Self::DEFAULT_LAMBDA;
        let r = -l3 / l1;
        let (c_plus, c_minus) = Self::default_coefficients(case, r);
        Self {
            lambda1: l1,
            lambda2: l2,
            lambda3: l3,
            c_plus,
            c_minus,
            kappa: Self::DEFAULT_KAPPA,
            gamma: 0.0,
            delta_rep: Self::DEFAULT_DELTA_REP,
            case,
        }
    }

    /// Branch coefficients realizing `case` for the exponent `r`.
    pub fn default_coefficients(case: Case, r: f64) -> (f64, f64) {
        let fixed = 2f64.powf(r);
        match case {
            Case::A => (fixed, Self::DEFAULT_STRICT_C),
            Case::B => (Self::DEFAULT_STRICT_C, fixed),
            Case::C => (Self::DEFAULT_STRICT_C, Self::DEFAULT_STRICT_C),
        }
    }

    pub fn with_auto_gamma(mut self) -> Result<Self> {
        self.gamma = crate::pseudo_orbit::choose_gamma(&self)?;
        Ok(self)
    }

    pub fn with_delta_rep(mut self, delta_rep: f64) -> Self {
        self.delta_rep = delta_rep;
        self
    }

    /// Exponent of `f`, `-l3 / l1`.
    pub fn r(&self) -> f64 {
        -self.lambda3 / self.lambda1
    }

    /// Exponent of `g`, `-l2 / l1`.
    pub fn s_exp(&self) -> f64 {
        -self.lambda2 / self.lambda1
    }

    pub fn tube_time(&self) -> f64 {
        Self::TUBE_TIME
    }

    /// Expansion constant: the minimum of `f'` over both branches.
    ///
    /// `f'` is decreasing in `|x|` on each branch, so the minimum sits at `|x| = 1/2`.
    pub fn lambda_exp(&self) -> f64 {
        let r = self.r();
        self.c_plus.min(self.c_minus) * r * 2f64.powf(1.0 - r)
    }

    /// Uniform bound on `dg/dy = kappa |x|^s` over `|x| <= 1/2`.
    pub fn contraction_bound(&self) -> f64 {
        self.kappa * 2f64.powf(-self.s_exp())
    }

    pub fn image_of_right_leaf(&self) -> f64 {
        self.c_plus * 0.5f64.powf(self.r()) - 0.5
    }

    pub fn image_of_left_leaf(&self) -> f64 {
        0.5 - self.c_minus * 0.5f64.powf(self.r())
    }

    /// Which case the coefficients realize, if any.
    pub fn detected_case(&self) -> Option<Case> {
        let right = self.image_of_right_leaf();
        let left = self.image_of_left_leaf();
        let right_fixed = (right - 0.5).abs() <= CASE_TOL;
        let left_fixed = (left + 0.5).abs() <= CASE_TOL;
        let right_strict = right < 0.5 - CASE_TOL;
        let left_strict = left > -0.5 + CASE_TOL;
        match (left_strict, left_fixed, right_strict, right_fixed) {
            (true, _, _, true) => Some(Case::A),
            (_, true, true, _) => Some(Case::B),
            (true, _, true, _) => Some(Case::C),
            _ => None,
        }
    }

    pub fn check_case(&self) -> Result<()> {
        match self.detected_case() {
            Some(c) if c == self.case => Ok(()),
            other => Err(Error::CaseMismatch {
                case: self.case.to_string(),
                detail: format!(
                    "f(L-) = {:.12}, f(L+) = {:.12} realize {}",
                    self.image_of_left_leaf(),
                    self.image_of_right_leaf(),
                    other.map_or("no admissible case".to_string(), |c| format!("case {c}"))
                ),
            }),
        }
    }

    /// The model axioms (eigenvalue chain, expansion, contraction, image bound,
    /// case consistency). Geometric separations are checked separately.
    pub fn check_axioms(&self) -> Vec<AxiomCheck> {
        let mut out = Vec::new();
        let (l1, l2, l3) = (self.lambda1, self.lambda2, self.lambda3);
        out.push(AxiomCheck {
            name: "h1",
            passed: 0.0 < -l3 && -l3 < l1 && l1 < -l2,
            detail: format!("0 < {} < {} < {}", -l3, l1, -l2),
        });
        let lam = self.lambda_exp();
        out.push(AxiomCheck {
            name: "P3",
            passed: lam > 2f64.sqrt(),
            detail: format!("min f' = {lam:.6} vs sqrt(2) = {:.6}", 2f64.sqrt()),
        });
        let cb = self.contraction_bound();
        out.push(AxiomCheck {
            name: "P4",
            passed: self.kappa > 0.0 && cb > 0.0 && cb < 1.0,
            detail: format!("sup dg/dy = {cb:.6}"),
        });
        let cap = 2f64.powf(self.r());
        out.push(AxiomCheck {
            name: "image",
            passed: self.c_plus > 0.0
                && self.c_minus > 0.0
                && self.c_plus <= cap * (1.0 + CASE_TOL)
                && self.c_minus <= cap * (1.0 + CASE_TOL),
            detail: format!("c+ = {}, c- = {}, 2^r = {cap}", self.c_plus, self.c_minus),
        });
        out.push(AxiomCheck {
            name: "kappa",
            passed: self.kappa > 0.0 && self.kappa < 1.0,
            detail: format!("kappa = {}", self.kappa),
        });
        out.push(AxiomCheck {
            name: "delta_rep",
            passed: self.delta_rep >= 0.0 && self.delta_rep.is_finite(),
            detail: format!("Delta = {}", self.delta_rep),
        });
        let case = self.check_case();
        out.push(AxiomCheck {
            name: "case",
            passed: case.is_ok(),
            detail: match case {
                Ok(()) => format!("case {}", self.case),
                Err(e) => e.to_string(),
            },
        });
        out
    }

    /// Fails with the names of every violated axiom.
    pub fn validate(&self) -> Result<()> {
        let failed: Vec<String> = self
            .check_axioms()
            .into_iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(failed.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_satisfy_axioms() {
        for case in Case::ALL {
            let p = ModelParams::for_case(case);
            assert!(p.validate().is_ok(), "{case}: {:?}", p.validate());
            assert_eq!(p.detected_case(), Some(case));
            assert_eq!(p.r(), 0.75);
            assert_eq!(p.s_exp(), 2.0);
        }
    }

    #[test]
    fn expansion_constant_of_strict_branch() {
        let p = ModelParams::for_case(Case::C);
        assert!((p.lambda_exp() - 1.4538).abs() < 1e-4);
        assert!((p.contraction_bound() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn small_exponent_breaks_expansion() {
        let mut p = ModelParams::for_case_without_gamma(Case::A);
        p.lambda3 = -0.5;
        p.c_plus = 2f64.powf(0.75);
        // c * r * 2^(1 - r) with r = 1/2
        let expected = 2f64.powf(0.75) * 0.5 * 2f64.sqrt();
        assert!((expected - 1.189).abs() < 1e-3);
        let failed: Vec<_> = p.check_axioms().into_iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert!(failed.contains(&"P3"));
    }

    #[test]
    fn eigenvalue_chain_is_checked() {
        let mut p = ModelParams::for_case(Case::C);
        p.lambda3 = -1.5;
        assert!(!p.check_axioms()[0].passed);
    }

    #[test]
    fn case_parse_roundtrip() {
        for c in Case::ALL {
            assert_eq!(c.to_string().parse::<Case>().unwrap(), c);
        }
        assert!("D".parse::<Case>().is_err());
    }
}
