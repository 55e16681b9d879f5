//! `estimate`: model-free point estimates of Z, W and W/Z.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use missmass::estimators::{
    good_toulmin_rb, good_turing_classic, good_turing_rb, harmonic_mean, ipw, mixture_estimate, rb_exact,
    rb_poisson_lambda, rb_poisson_weights, rb_z_equation, GoodTuring, HarmonicMode, MixtureInput, ZVariant,
};
use missmass::{EstimateResult, Inclusion, Observation, RbWeights, SolverConfig};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::input::{check_input, check_output, load_observation, parse, read_json};
use crate::output::{emit, num, nums};
use crate::{usage, SolverArgs};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimateMethod {
    IpwFixed,
    IpwPoisson,
    RbExact,
    RbPoisson,
    Gt,
    GtRb,
    Gtoulmin,
    Hm,
    Mixture,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Pi {
    Poisson,
    FixedN,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum RbEquation {
    /// V/Z = (1/N) Σ v π
    VOverZ,
    /// M/Z = (1/N) Σ v π / p
    MOverZ,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum HmMode {
    Classic,
    RbLinear,
    Ipw,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Weights {
    Exact,
    Poisson,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Observation JSON.
    input: PathBuf,
    #[arg(long, value_enum)]
    method: EstimateMethod,
    /// Inclusion probability used by the self-consistent equations.
    #[arg(long, value_enum, default_value = "poisson")]
    pi: Pi,
    /// Equation solved by rb-exact and rb-poisson.
    #[arg(long, value_enum, default_value = "v-over-z")]
    rb_equation: RbEquation,
    /// JSON array of h, aligned with the entries (harmonic mean).
    #[arg(long)]
    h_file: Option<PathBuf>,
    /// Known total H of h (harmonic mean).
    #[arg(long = "H")]
    total_h: Option<f64>,
    #[arg(long, value_enum, default_value = "classic")]
    hm_mode: HmMode,
    /// Expected counts for the rb-linear harmonic mean (default exact) and
    /// for the v-weighted mixture totals (omitted unless given).
    #[arg(long, value_enum)]
    weights: Option<Weights>,
    /// Weight of the h anchor for the mixture estimator, in [0, 1].
    #[arg(long)]
    gamma: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Mixture decomposition of the sampled points, as written by
/// `simulate --model toy-physics`.
#[derive(Deserialize)]
struct MixtureBlock {
    r: Vec<Vec<f64>>,
    w: Vec<f64>,
    h: Option<Vec<f64>>,
    #[serde(rename = "H")]
    total_h: Option<f64>,
}

fn method_name(m: EstimateMethod) -> &'static str {
    match m {
        EstimateMethod::IpwFixed => "ipw-fixed",
        EstimateMethod::IpwPoisson => "ipw-poisson",
        EstimateMethod::RbExact => "rb-exact",
        EstimateMethod::RbPoisson => "rb-poisson",
        EstimateMethod::Gt => "gt",
        EstimateMethod::GtRb => "gt-rb",
        EstimateMethod::Gtoulmin => "gtoulmin",
        EstimateMethod::Hm => "hm",
        EstimateMethod::Mixture => "mixture",
    }
}

/// Z, W, W/Z and diagnostics, before the common fields are added.
struct Estimate {
    z: f64,
    w: f64,
    w_over_z: f64,
    diagnostics: Map<String, Value>,
    reason: Option<String>,
}

impl Estimate {
    /// From an estimate of Z; W = Z − V.
    fn from_z(r: EstimateResult, v: f64) -> Self {
        let z = r.value;
        let (w, w_over_z) = if z.is_infinite() {
            (f64::INFINITY, 1.0)
        } else if z > 0.0 {
            (z - v, 1.0 - v / z)
        } else {
            (f64::NAN, f64::NAN)
        };
        Self {
            z,
            w,
            w_over_z,
            diagnostics: r.diagnostics.into_iter().map(|(k, v)| (k, num(v))).collect(),
            reason: r.reason,
        }
    }

    fn from_gt(g: GoodTuring) -> Self {
        let reason = g.z.is_infinite().then(|| "every count is a singleton".to_string());
        Self {
            z: g.z,
            w: g.w,
            w_over_z: g.w_over_z,
            diagnostics: Map::new(),
            reason,
        }
    }

    /// From an estimate of W/Z; Z = V / (1 − W/Z).
    fn from_ratio(ratio: f64, v: f64) -> Self {
        let (z, w, reason) = if ratio >= 1.0 {
            (f64::INFINITY, f64::INFINITY, Some("W/Z estimate reaches 1".to_string()))
        } else {
            let z = v / (1.0 - ratio);
            (z, z * ratio, None)
        };
        Self {
            z,
            w,
            w_over_z: ratio,
            diagnostics: Map::new(),
            reason,
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.into(), num(value));
        self
    }
}

fn rb_weights(obs: &Observation, which: Weights, cfg: &SolverConfig) -> Result<RbWeights> {
    Ok(match which {
        Weights::Exact => rb_exact(obs)?,
        Weights::Poisson => rb_poisson_weights(obs, cfg)?,
    })
}

fn load_h(args: &EstimateArgs, obs: &Observation, block: Option<&MixtureBlock>) -> Result<(Vec<f64>, f64)> {
    let h = match (&args.h_file, block.and_then(|b| b.h.clone())) {
        (Some(p), _) => parse(&read_json(p)?, "invalid h", p)?,
        (None, Some(h)) => h,
        (None, None) => return Err(usage("h is needed: pass --h-file")),
    };
    let total = args
        .total_h
        .or(block.and_then(|b| b.total_h))
        .ok_or_else(|| usage("the total of h is needed: pass --H"))?;
    if h.len() != obs.m() {
        return Err(usage(format!("h has {} values for {} entries", h.len(), obs.m())));
    }
    Ok((h, total))
}

pub fn run(args: EstimateArgs) -> Result<()> {
    check_input(&args.input)?;
    if let Some(p) = &args.h_file {
        check_input(p)?;
    }
    if let Some(p) = &args.out {
        check_output(p)?;
    }
    let cfg = args.solver.config()?;
    let (obs, raw) = load_observation(&args.input)?;
    let inclusion = match args.pi {
        Pi::Poisson => Inclusion::Poisson,
        Pi::FixedN => Inclusion::FixedN,
    };
    let v = obs.v();
    let variant = match args.rb_equation {
        RbEquation::VOverZ => ZVariant::VOverZ,
        RbEquation::MOverZ => ZVariant::MOverZ,
    };
    let est = match args.method {
        EstimateMethod::IpwFixed => Estimate::from_z(ipw(&obs, Inclusion::FixedN, &cfg)?, v),
        EstimateMethod::IpwPoisson => Estimate::from_z(ipw(&obs, Inclusion::Poisson, &cfg)?, v),
        EstimateMethod::RbExact | EstimateMethod::RbPoisson => {
            let which = if args.method == EstimateMethod::RbExact {
                Weights::Exact
            } else {
                Weights::Poisson
            };
            let weights = rb_weights(&obs, which, &cfg)?;
            let mut e = Estimate::from_z(rb_z_equation(&obs, &weights, variant, inclusion, &cfg)?, v);
            if let Some(l) = weights.log_f_n {
                e = e.with("log_F_N", l);
            }
            if let Some(l) = weights.lambda {
                e = e.with("lambda", l);
            }
            e
        }
        EstimateMethod::Gt => Estimate::from_gt(good_turing_classic(&obs)?),
        EstimateMethod::GtRb => Estimate::from_gt(good_turing_rb(&obs, &cfg)?),
        EstimateMethod::Gtoulmin => {
            let lambda = rb_poisson_lambda(&obs, &cfg)?;
            Estimate::from_ratio(good_toulmin_rb(&obs, lambda)?, v).with("lambda", lambda)
        }
        EstimateMethod::Hm => {
            let (h, total) = load_h(&args, &obs, None)?;
            let mode = match args.hm_mode {
                HmMode::Classic => HarmonicMode::Classic,
                HmMode::RbLinear => HarmonicMode::RbLinear,
                HmMode::Ipw => HarmonicMode::IpwNonlinear,
            };
            let weights = match mode {
                HarmonicMode::RbLinear => Some(rb_weights(&obs, args.weights.unwrap_or(Weights::Exact), &cfg)?),
                _ => None,
            };
            Estimate::from_z(harmonic_mean(&obs, &h, total, mode, weights.as_ref(), inclusion, &cfg)?, v)
        }
        EstimateMethod::Mixture => {
            let gamma = args.gamma.ok_or_else(|| usage("the mixture estimator needs --gamma"))?;
            let block: MixtureBlock = match raw.get("mixture") {
                Some(m) => parse(m, "invalid mixture block", &args.input)?,
                None => return Err(usage("the input has no \"mixture\" block")),
            };
            let h = if gamma > 0.0 { Some(load_h(&args, &obs, Some(&block))?) } else { None };
            let weights = args.weights.map(|w| rb_weights(&obs, w, &cfg)).transpose()?;
            let input = MixtureInput {
                r: &block.r,
                w: &block.w,
                gamma,
                h: h.as_ref().map(|(h, _)| h.as_slice()),
                total_h: h.as_ref().map(|(_, t)| *t),
                inclusion,
                weights: weights.as_ref(),
            };
            let m = mixture_estimate(&obs, &input, &cfg).context("mixture estimate")?;
            let mut e = Estimate::from_z(m.z, v);
            e.diagnostics.insert("R_ipw".into(), nums(&m.r_ipw));
            if let Some(r) = &m.r_rb {
                e.diagnostics.insert("R_rb".into(), nums(r));
            }
            e.diagnostics.insert("roots".into(), nums(&m.roots));
            e
        }
    };
    let mut diagnostics = est.diagnostics;
    diagnostics.insert("M".into(), json!(obs.m()));
    diagnostics.insert("N".into(), json!(obs.n()));
    diagnostics.insert("V".into(), num(v));
    let mut out = json!({
        "method": method_name(args.method),
        "Z": num(est.z),
        "W": num(est.w),
        "W_over_Z": num(est.w_over_z),
        "diagnostics": diagnostics,
    });
    if let Some(r) = est.reason {
        out["reason"] = json!(r);
    }
    emit(&out, args.out.as_deref())
}
