use std::fmt::Write as _;

use crate::hulls::{HullCheck, HullProfile};

pub const RISK_HEADER: &str = "epsilon,estimator,mc_risk,mc_std_error,oracle_risk_blockwise,oracle_risk_monotone,ratio_blockwise,ratio_monotone,max_pen_over_sigma2,rho_eps";
pub const HULL_HEADER: &str = "variant,B,C2,mean,std_error,holds";
pub const CHECK_HEADER: &str = "epsilon,check,value,std_error,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    PenalizedStein,
    Ure,
}

impl Estimator {
    pub fn tag(self) -> &'static str {
        match self {
            Estimator::PenalizedStein => "penalized_stein",
            Estimator::Ure => "ure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskRow {
    pub epsilon: f64,
    pub estimator: Estimator,
    pub mc_risk: f64,
    pub mc_std_error: f64,
    pub oracle_risk_blockwise: f64,
    pub oracle_risk_monotone: f64,
    /// NaN when the oracle risk is zero.
    pub ratio_blockwise: f64,
    pub ratio_monotone: f64,
    pub max_pen_over_sigma2: f64,
    pub rho_eps: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RiskReport {
    pub rows: Vec<RiskRow>,
}

impl RiskReport {
    pub fn row(&self, epsilon: f64, estimator: Estimator) -> Option<&RiskRow> {
        self.rows
            .iter()
            .find(|r| r.epsilon == epsilon && r.estimator == estimator)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{RISK_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.epsilon,
                r.estimator.tag(),
                r.mc_risk,
                r.mc_std_error,
                r.oracle_risk_blockwise,
                r.oracle_risk_monotone,
                r.ratio_blockwise,
                r.ratio_monotone,
                r.max_pen_over_sigma2,
                r.rho_eps
            );
        }
        s
    }
}

/// `numerator / denominator`, NaN when the denominator vanishes.
pub fn guarded_ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator > 0.0 {
        numerator / denominator
    } else {
        f64::NAN
    }
}

pub fn hull_rows(profile: &HullProfile) -> String {
    let mut s = String::new();
    for (
        b,
        HullCheck {
            mean,
            std_error,
            holds,
        },
    ) in &profile.points
    {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            profile.variant, b, profile.c2, mean, std_error, holds
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    /// NaN for checks spanning the whole grid.
    pub epsilon: f64,
    pub check: &'static str,
    pub value: f64,
    pub std_error: f64,
    pub status: Status,
}

pub fn check_table(rows: &[CheckRow]) -> String {
    let mut s = format!("{CHECK_HEADER}\n");
    for r in rows {
        let eps = if r.epsilon.is_nan() {
            "all".to_string()
        } else {
            r.epsilon.to_string()
        };
        let _ = writeln!(
            s,
            "{eps},{},{},{},{}",
            r.check,
            r.value,
            r.std_error,
            r.status.as_str()
        );
    }
    s
}
