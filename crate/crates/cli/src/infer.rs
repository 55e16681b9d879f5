//! `infer`: laws of W and W/Z from the Bayesian, profile and mixed
//! treatments, or from point estimates of (α, b, λ).

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use missmass::inference::AlphaSummary;
use missmass::moments::mle_full;
use missmass::{
    infer, match_strategy, Base, InferenceConfig, InferenceMethod, LikelihoodModel, MassDistribution, Strategy,
};
use serde_json::{json, Map, Value};

use crate::input::{check_input, check_output, load_observation};
use crate::output::{emit, num, nums, write_csv};
use crate::{usage, SolverArgs};

const LEVELS: [(u32, f64); 5] = [(5, 0.05), (25, 0.25), (50, 0.5), (75, 0.75), (95, 0.95)];

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InferMethod {
    Bayes,
    Profile,
    Mixed,
    Mle,
    MomentMatch,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BaseArg {
    #[value(name = "L5")]
    L5,
    #[value(name = "L9")]
    L9,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    #[value(name = "A")]
    A,
    #[value(name = "B")]
    B,
    #[value(name = "C")]
    C,
    #[value(name = "MLE")]
    Mle,
}

#[derive(Args)]
pub struct InferArgs {
    /// Observation JSON.
    input: PathBuf,
    #[arg(long, value_enum)]
    method: InferMethod,
    /// Likelihood used to fit α in the mixed treatment.
    #[arg(long, value_enum, default_value = "L5")]
    base: BaseArg,
    /// Moment-matching strategy (with --method moment-match).
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// W grid size for the Bayesian and profile treatments; also the row
    /// count of the CSV for closed-form laws.
    #[arg(long, default_value_t = InferenceConfig::default().grid_points)]
    grid_points: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write the W law as CSV (W, density, cumulative).
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Summary JSON; stdout when absent.
    #[arg(long)]
    out_json: Option<PathBuf>,
}

fn quantiles(law: &MassDistribution, map: impl Fn(f64) -> f64) -> Value {
    let m: Map<String, Value> = LEVELS
        .iter()
        .map(|&(k, q)| (k.to_string(), num(map(law.quantile(q)))))
        .collect();
    Value::Object(m)
}

fn alpha_value(a: &AlphaSummary) -> Value {
    let mut v = json!({ "value": num(a.value()) });
    match *a {
        AlphaSummary::Point { converged, .. } => v["converged"] = json!(converged),
        AlphaSummary::Infinite => v["reason"] = json!("likelihood increases without bound in alpha"),
        AlphaSummary::Marginal { log_evidence, .. } => v["log_evidence"] = num(log_evidence),
        AlphaSummary::Profile { .. } => {}
    }
    v
}

pub fn run(args: InferArgs) -> Result<()> {
    check_input(&args.input)?;
    for p in [&args.out_csv, &args.out_json].into_iter().flatten() {
        check_output(p)?;
    }
    if (args.method == InferMethod::MomentMatch) != args.strategy.is_some() {
        return Err(usage("--strategy goes with --method moment-match, and only there"));
    }
    if args.grid_points < 3 {
        return Err(usage("--grid-points must be at least 3"));
    }
    let cfg = InferenceConfig {
        solver: args.solver.config()?,
        grid_points: args.grid_points,
        base: match args.base {
            BaseArg::L5 => Base::L5,
            BaseArg::L9 => Base::L9,
        },
    };
    let (obs, _) = load_observation(&args.input)?;
    let model = LikelihoodModel::new(&obs)?;
    let (v, y) = (model.stats.v, model.stats.y);
    let (w_law, mut out) = match args.method {
        InferMethod::Bayes | InferMethod::Profile | InferMethod::Mixed => {
            let method = match args.method {
                InferMethod::Bayes => InferenceMethod::Bayes,
                InferMethod::Profile => InferenceMethod::Profile,
                _ => InferenceMethod::Mixed,
            };
            let r = infer(&model, method, &cfg)?;
            let out = json!({
                "method": method,
                "alpha": alpha_value(&r.alpha),
                "mean_W": num(r.w_dist.mean()),
                "mean_Z": num(r.z_dist.mean()),
                "mean_W_over_Z": num(r.w_over_z_dist.mean()),
                "quantiles": quantiles(&r.w_dist, |q| q),
                "quantiles_W_over_Z": quantiles(&r.w_over_z_dist, |q| q),
                "singular_case": r.singular_case,
            });
            (r.w_dist, out)
        }
        InferMethod::Mle | InferMethod::MomentMatch => {
            let r = match args.strategy {
                None => mle_full(&obs, &cfg.solver)?,
                Some(s) => {
                    let strategy = match s {
                        StrategyArg::A => Strategy::A,
                        StrategyArg::B => Strategy::B,
                        StrategyArg::C => Strategy::C,
                        StrategyArg::Mle => Strategy::Mle,
                    };
                    match_strategy(&obs, strategy, &cfg.solver)?
                }
            };
            let law = r.w_law(y)?;
            let mut out = json!({
                "method": if args.method == InferMethod::Mle { "mle" } else { "moment-match" },
                "alpha": { "value": num(r.params.alpha) },
                "params": { "alpha": num(r.params.alpha), "b": num(r.params.b), "lambda": num(r.params.lambda) },
                "mean_W": num(law.mean()),
                "mean_Z": num(v + law.mean()),
                "mean_W_over_Z": num(r.w_over_z_mean(v, y, &cfg.solver)?),
                "quantiles": quantiles(&law, |q| q),
                "quantiles_W_over_Z": quantiles(&law, |q| q / (v + q)),
                "singular_case": Value::Null,
                "verdict": serde_json::to_value(&r.verdict)?,
                "residuals": nums(&r.residuals),
                "candidates": nums(&r.candidates),
            });
            if args.strategy.is_some() {
                out["strategy"] = serde_json::to_value(r.strategy)?;
            }
            (law, out)
        }
    };
    if let missmass::DistKind::PointMass { value } = w_law.kind {
        out["point_mass"] = num(value + w_law.offset);
    }
    if let Some(p) = &args.out_csv {
        write_csv(p, &w_law.tabulate(args.grid_points))?;
    }
    emit(&out, args.out_json.as_deref())
}
