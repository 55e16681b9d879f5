//! `simulate`: draws a dataset and writes it as JSON. The file is also a
//! valid observation (it carries `domain_size`, `x` and the sampled
//! `entries`), so it can be fed straight to `estimate` and `infer`.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use missmass::simulate::{simulate_explicit, simulate_replicate, toy_physics, ToySpec};
use missmass::{GenOrder, ModelParams, Protocol};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::input::{check_input, check_output, parse, read_json};
use crate::output::{emit, num, nums};
use crate::usage;

#[derive(Clone, Copy, ValueEnum)]
pub enum Model {
    GammaPoisson,
    Explicit,
    ToyPhysics,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Order {
    #[value(name = "p-c")]
    PC,
    ZDirichlet,
    #[value(name = "c-p")]
    CP,
}

impl From<Order> for GenOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::PC => GenOrder::PThenC,
            Order::ZDirichlet => GenOrder::ZDirichletThenC,
            Order::CP => GenOrder::CThenP,
        }
    }
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Generation order of the Gamma–Poisson model.
    #[arg(long, value_enum, default_value = "p-c")]
    order: Order,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Poisson rate; for explicit and toy-physics models it selects Poisson
    /// counts with means λp.
    #[arg(long)]
    lambda: Option<f64>,
    /// Fixed number of draws (explicit and toy-physics models).
    #[arg(long)]
    n: Option<u64>,
    /// Domain size with uniform base measure.
    #[arg(long)]
    domain: Option<usize>,
    /// JSON array with the base measure x.
    #[arg(long)]
    x_file: Option<PathBuf>,
    /// JSON object {"x": [...], "p": [...]} for the explicit model; x may be
    /// omitted for a uniform base measure.
    #[arg(long)]
    masses_file: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    spins: u32,
    /// Comma-separated; `inf` is allowed.
    #[arg(long, value_delimiter = ',', default_values_t = [f64::INFINITY, 2.0, 0.8])]
    temperatures: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    #[arg(long, default_value_t = 0.5)]
    field: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct MassesFile {
    x: Option<Vec<f64>>,
    p: Vec<f64>,
}

fn uniform(d: usize) -> Vec<f64> {
    vec![1.0 / d as f64; d]
}

fn base_measure(args: &SimulateArgs) -> Result<Vec<f64>> {
    match (&args.x_file, args.domain) {
        (Some(_), Some(_)) => Err(usage("give either --domain or --x-file")),
        (Some(p), None) => parse(&read_json(p)?, "invalid base measure", p),
        (None, Some(d)) if d > 0 => Ok(uniform(d)),
        _ => Err(usage("the base measure needs --domain or --x-file")),
    }
}

fn protocol(args: &SimulateArgs) -> Result<Option<Protocol>> {
    match (args.n, args.lambda) {
        (Some(_), Some(_)) => Err(usage("give either --n or --lambda")),
        (Some(n), None) => Ok(Some(Protocol::FixedN(n))),
        (None, Some(l)) => Ok(Some(Protocol::Poisson(l))),
        (None, None) => Ok(None),
    }
}

pub fn run(args: SimulateArgs) -> Result<()> {
    for p in [&args.x_file, &args.masses_file].into_iter().flatten() {
        check_input(p)?;
    }
    if let Some(p) = &args.out {
        check_output(p)?;
    }
    let out = match args.model {
        Model::GammaPoisson => {
            let (Some(alpha), Some(b), Some(lambda)) = (args.alpha, args.b, args.lambda) else {
                return Err(usage("gamma-poisson needs --alpha, --b and --lambda"));
            };
            let x = base_measure(&args)?;
            let params = ModelParams::new(alpha, b, lambda)?;
            let data = simulate_replicate(&x, &params, args.order.into(), args.seed, args.replicate)?;
            let mut v = serde_json::to_value(&data)?;
            v["model"] = json!({
                "kind": "gamma-poisson",
                "alpha": num(alpha),
                "b": num(b),
                "lambda": num(lambda),
                "order": GenOrder::from(args.order),
                "seed": args.seed,
                "replicate": args.replicate,
                "Z": num(data.total_mass()),
                "W": num(data.missing_mass()),
            });
            v
        }
        Model::Explicit => {
            let Some(path) = &args.masses_file else {
                return Err(usage("explicit needs --masses-file"));
            };
            let Some(protocol) = protocol(&args)? else {
                return Err(usage("explicit needs --n or --lambda"));
            };
            let masses: MassesFile = parse(&read_json(path)?, "invalid masses file", path)?;
            let x = masses.x.unwrap_or_else(|| uniform(masses.p.len()));
            let data = simulate_explicit(&x, &masses.p, protocol, args.seed, args.replicate)?;
            let mut v = serde_json::to_value(&data)?;
            v["model"] = json!({
                "kind": "explicit",
                "protocol": protocol,
                "seed": args.seed,
                "replicate": args.replicate,
                "Z": num(data.total_mass()),
                "W": num(data.missing_mass()),
            });
            v
        }
        Model::ToyPhysics => toy(&args)?,
    };
    emit(&out, args.out.as_deref())
}

/// A sample from the spin ring, with the mixture decomposition of every
/// sampled point so that `estimate --method mixture` can use it.
fn toy(args: &SimulateArgs) -> Result<Value> {
    let spec = ToySpec {
        spins: args.spins,
        temperatures: args.temperatures.clone(),
        coupling: args.coupling,
        field: args.field,
        weights: None,
    };
    let system = toy_physics(&spec, args.seed)?;
    // default: Poisson counts with about four times the effective size
    let protocol = protocol(args)?.unwrap_or(Protocol::Poisson(4.0 * system.n_effective() / system.z));
    let data = system.sample(protocol, args.seed, args.replicate)?;
    let obs = data.observe();
    let mut mixture = json!({
        "w": nums(&system.w),
        "r": obs.entries.iter().map(|e| nums(&system.r[e.i])).collect::<Vec<_>>(),
        "R": nums(&system.r_totals),
    });
    // an infinite-temperature component has r = 1 everywhere and a known total
    if let Some(j) = spec.temperatures.iter().position(|t| t.is_infinite()) {
        mixture["h"] = nums(&obs.entries.iter().map(|e| system.r[e.i][j]).collect::<Vec<_>>());
        mixture["H"] = num(system.r_totals[j]);
    }
    let mut v = serde_json::to_value(&data)?;
    v["mixture"] = mixture;
    v["model"] = json!({
        "kind": "toy-physics",
        "spins": spec.spins,
        "temperatures": nums(&spec.temperatures),
        "coupling": num(spec.coupling),
        "field": num(spec.field),
        "protocol": protocol,
        "seed": args.seed,
        "replicate": args.replicate,
        "n_effective": num(system.n_effective()),
        "Z": num(system.z),
        "W": num(data.missing_mass()),
    });
    Ok(v)
}
