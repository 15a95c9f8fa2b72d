//! `diana theory`: parameters, admissibility checks and bound curve without
//! running the optimizer.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use diana_core::theory::{leading_term, optimal_nodes, OptimalNodes};
use diana_core::{Method, PNorm, ProblemConstants, Schedule};

use crate::config::{Experiment, TheorySpec, Validation};
use crate::run::{reference_curve, Curve};
use crate::{Failure, VERSION};

#[derive(Debug, Serialize)]
pub struct NodesReport {
    pub d: u64,
    pub m: u64,
    #[serde(flatten)]
    pub nodes: OptimalNodes,
}

#[derive(Debug, Serialize)]
pub struct TheoryReport {
    pub version: &'static str,
    pub status: &'static str,
    pub problem: String,
    pub constants: ProblemConstants,
    pub method: Method,
    pub p: PNorm,
    pub max_block: usize,
    pub alpha_p: f64,
    pub alpha: f64,
    pub lyapunov_c: f64,
    pub schedule: Schedule,
    pub beta: f64,
    pub provenance: BTreeMap<String, String>,
    pub validation: Validation,
    /// `max{1, κ/n, κα_p}`-type complexity, for strongly convex problems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leading_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<Curve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimal_nodes: Option<NodesReport>,
}

pub fn report(exp: &Experiment) -> Result<TheoryReport, Failure> {
    let constants = *exp.problem.constants().ok_or_else(|| {
        Failure::Config("problem: constants are unknown, no bounds available".into())
    })?;
    let spec = exp.input.theory.clone().unwrap_or_default();
    let TheorySpec { k, v0, nodes } = spec;
    let (curve, curve_error) = match reference_curve(exp, &k, v0) {
        Ok(c) => (c, None),
        Err(e) => (None, Some(e)),
    };
    let optimal_nodes = match nodes {
        Some(n) => Some(NodesReport {
            d: n.d,
            m: n.m,
            nodes: optimal_nodes(n.d, n.m)
                .map_err(|e| Failure::Config(format!("theory.nodes: {e}")))?,
        }),
        None => None,
    };
    let leading = (exp.config.alpha > 0.0)
        .then(|| constants.kappa())
        .flatten()
        .map(|kappa| leading_term(constants.n as f64, kappa, exp.alpha_p));
    Ok(TheoryReport {
        version: VERSION,
        status: exp.validation.stamp(),
        problem: exp.problem.name().to_string(),
        constants,
        method: exp.config.method,
        p: exp.config.p,
        max_block: exp.config.layout.max_block(),
        alpha_p: exp.alpha_p,
        alpha: exp.config.alpha,
        lyapunov_c: exp.lyapunov_c,
        schedule: exp.config.schedule,
        beta: exp.config.beta,
        provenance: exp.provenance.clone(),
        validation: exp.validation.clone(),
        leading_term: leading,
        curve,
        curve_error,
        optimal_nodes,
    })
}

fn source(r: &TheoryReport, key: &str) -> String {
    r.provenance
        .get(key)
        .map(|s| format!("  ({s})"))
        .unwrap_or_default()
}

pub fn render(r: &TheoryReport) -> String {
    let mut s = String::new();
    let k = &r.constants;
    let _ = writeln!(s, "version    {}", r.version);
    let _ = writeln!(
        s,
        "problem    {}  n={}  L={}  mu={}  sigma2={}",
        r.problem, k.n, k.l, k.mu, k.sigma2
    );
    if let Some(z) = k.zeta2 {
        let _ = writeln!(s, "zeta2      {z}");
    }
    let method = match r.method {
        Method::Diana => "diana",
        Method::Baseline => "baseline",
    };
    let _ = writeln!(
        s,
        "method     {method}  p={}  max block={}  alpha_p={}",
        r.p, r.max_block, r.alpha_p
    );
    let _ = writeln!(s, "alpha      {}{}", r.alpha, source(r, "alpha"));
    let _ = writeln!(s, "c          {}{}", r.lyapunov_c, source(r, "lyapunov_c"));
    match r.schedule {
        Schedule::Constant { gamma } => {
            let _ = writeln!(s, "gamma      {gamma}{}", source(r, "gamma"));
        }
        Schedule::Decreasing { mu, theta } => {
            let _ = writeln!(s, "gamma      2/({mu}k + {theta}){}", source(r, "theta"));
        }
    }
    if r.beta > 0.0 {
        let _ = writeln!(s, "beta       {}", r.beta);
    }
    if let Some(t) = r.leading_term {
        let _ = writeln!(s, "complexity {t}");
    }
    let _ = writeln!(s, "checks     {}", r.status);
    if let Some(u) = &r.validation.unavailable {
        let _ = writeln!(s, "  {u}");
    }
    for c in &r.validation.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        match &c.detail {
            Some(d) => {
                let _ = writeln!(s, "  [{mark}] {}: {d}", c.name);
            }
            None => {
                let _ = writeln!(s, "  [{mark}] {}", c.name);
            }
        }
    }
    match (&r.curve, &r.curve_error) {
        (Some(c), _) => {
            let _ = writeln!(s, "bound      {}  (start {})", c.bounds, c.start);
            for (i, b) in &c.points {
                let _ = writeln!(s, "  k={i:<10} {b:e}");
            }
        }
        (None, Some(e)) => {
            let _ = writeln!(s, "bound      unavailable: {e}");
        }
        (None, None) => {
            let _ = writeln!(s, "bound      none for these parameters");
        }
    }
    if let Some(o) = &r.optimal_nodes {
        let _ = writeln!(
            s,
            "optimal nodes  d={} m={}  n*={}",
            o.d, o.m, o.nodes.n_star
        );
    }
    s
}
