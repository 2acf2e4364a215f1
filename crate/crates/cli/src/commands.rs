use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use fairwasp::cost::{compress_cached, compress_with};
use fairwasp::fairness::{conditionals, fairness_violation_sums, group_sums, pairwise_violation_sums};
use fairwasp::oracle::{brute_mip_with, brute_pairwise_mip_with, lp_optimum};
use fairwasp::recover::materialize_items;
use fairwasp::{
    build_constraints, generate_synthetic, group_index, load_csv_with, marginal_y, solve_pw, standardize, Dataset,
    FairwaspConfig, LoadOptions, Problem, PwConfig, PwStatus, RunStatus, SolverConfig, WeightVector,
};
use serde_json::{json, Value};

use crate::args::{
    BenchArgs, InputArgs, MaterializeArgs, OracleArgs, OracleMode, SolvePwArgs, SolveArgs, SolverArgs, SynthArgs,
    VerifyArgs,
};
use crate::report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ITERATION_LIMIT: i32 = 4;

fn load(args: &InputArgs) -> Result<Dataset> {
    let opts = LoadOptions {
        include_d_in_features: args.include_d_in_features,
        ..LoadOptions::new(&args.d_col, &args.y_col)
    };
    load_csv_with(&args.input, &opts).with_context(|| format!("loading {}", args.input.display()))
}

/// Standardized (unless disabled) copy of the features used for costs.
fn cost_view(args: &InputArgs, ds: &Dataset) -> Dataset {
    if args.no_standardize {
        ds.clone()
    } else {
        standardize(ds)
    }
}

fn prepare(args: &InputArgs, ds: &Dataset) -> Result<Problem> {
    let view = cost_view(args, ds);
    let gi = group_index(&view);
    let cc = match &args.cost_cache {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            compress_cached(&view, &gi, args.metric, dir)?
        }
        None => compress_with(&view, &gi, args.metric),
    };
    Ok(Problem {
        target: marginal_y(ds),
        gi,
        cc,
    })
}

fn fairwasp_config(s: &SolverArgs) -> Result<FairwaspConfig> {
    if !(s.epsilon >= 0.0 && s.epsilon.is_finite()) {
        bail!("--epsilon must be finite and nonnegative");
    }
    let cfg = FairwaspConfig {
        epsilon: s.epsilon,
        target: None,
        dedup_binary_y: s.dedup_binary_y,
        solver: SolverConfig {
            gap_tol: s.gap_tol,
            max_iters: s.max_iters,
            lambda_max: s.lambda_max,
            ..SolverConfig::default()
        },
        branch: !s.no_branch,
        max_nodes: s.max_nodes,
    };
    cfg.solver.validate()?;
    Ok(cfg)
}

fn write_weights(path: &Path, theta: &WeightVector) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    theta.write_csv(BufWriter::new(file))?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.3e}"))
}

pub fn solve(args: &SolveArgs) -> Result<i32> {
    let cfg = fairwasp_config(&args.solver)?;
    let ds = load(&args.input)?;
    let t0 = Instant::now();
    let problem = prepare(&args.input, &ds)?;
    let compress_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let sol = problem.solve(&cfg)?;
    let solve_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let (gi, t, eps) = (&problem.gi, &problem.target, cfg.epsilon);
    let before = report::fairness_json(&vec![1; ds.n()], gi, t, eps);
    let after = sol.theta.as_ref().map(|w| report::fairness_json(w.as_slice(), gi, t, eps));
    if let Some(theta) = &sol.theta {
        write_weights(&args.out, theta)?;
    }
    let recover_s = t2.elapsed().as_secs_f64();

    let manifest = json!({
        "command": "solve",
        "version": env!("CARGO_PKG_VERSION"),
        "input": report::input_json(&args.input, &ds),
        "config": report::solver_config_json(&args.solver),
        "solver": report::solution_json(&sol),
        "fairness": { "before": before, "after": after },
        "weights": sol.theta.as_ref().map(|_| args.out.display().to_string()),
        "timings": { "compress_s": compress_s, "solve_s": solve_s, "recover_s": recover_s },
    });
    report::write_manifest(&args.out, &manifest)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&manifest)?);
    } else {
        println!(
            "status {}  objective {:.6e}  rel_gap {:.3e}  violation {}",
            manifest["solver"]["status"].as_str().unwrap_or("?"),
            sol.objective,
            sol.rel_gap,
            fmt_opt(sol.violation)
        );
    }
    Ok(match sol.status {
        RunStatus::Converged | RunStatus::ConvergedWithTies => EXIT_OK,
        RunStatus::Infeasible => EXIT_INFEASIBLE,
        RunStatus::NumericalFailure => EXIT_NUMERICAL,
        RunStatus::IterationLimit => EXIT_ITERATION_LIMIT,
    })
}

pub fn solve_pw_cmd(args: &SolvePwArgs) -> Result<i32> {
    let inner = fairwasp_config(&args.solver)?;
    let cfg = PwConfig {
        epsilon: args.solver.epsilon,
        nm_max_evals: args.nm_max_evals,
        nm_tol: args.nm_tol,
        restarts: args.restarts,
        seed: args.seed,
        inner,
    };
    let ds = load(&args.input)?;
    let t0 = Instant::now();
    let problem = prepare(&args.input, &ds)?;
    let compress_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let sol = solve_pw(&problem, &cfg)?;
    let solve_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let gi = &problem.gi;
    let before = pairwise_json(&vec![1; ds.n()], gi);
    let after = sol.theta().map(|w| pairwise_json(w.as_slice(), gi));
    if let Some(theta) = sol.theta() {
        write_weights(&args.out, theta)?;
    }
    let recover_s = t2.elapsed().as_secs_f64();

    let mut config = report::solver_config_json(&args.solver);
    config["nm_max_evals"] = json!(args.nm_max_evals);
    config["nm_tol"] = json!(args.nm_tol);
    config["restarts"] = json!(args.restarts);
    config["seed"] = json!(args.seed);
    let manifest = json!({
        "command": "solve-pw",
        "version": env!("CARGO_PKG_VERSION"),
        "input": report::input_json(&args.input, &ds),
        "config": config,
        "solver": {
            "status": sol.status,
            "epsilon": sol.epsilon,
            "epsilon_bar": sol.epsilon_bar,
            "t_star": sol.t_star.as_ref().map(|t| &t.probs),
            "h_start": sol.h_start,
            "objective": sol.objective,
            "evaluations": sol.evaluations,
            "inner_iterations": sol.inner_iterations,
            "pairwise_violation": sol.pairwise_violation,
            "inner": sol.inner.as_ref().map(report::solution_json),
        },
        "fairness": { "before": before, "after": after },
        "weights": sol.theta().map(|_| args.out.display().to_string()),
        "timings": { "compress_s": compress_s, "solve_s": solve_s, "recover_s": recover_s },
    });
    report::write_manifest(&args.out, &manifest)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&manifest)?);
    } else {
        println!(
            "status {}  objective {:.6e}  t* {:?}  evaluations {}  pairwise violation {}",
            manifest["solver"]["status"].as_str().unwrap_or("?"),
            sol.objective,
            sol.t_star.as_ref().map(|t| &t.probs),
            sol.evaluations,
            fmt_opt(sol.pairwise_violation)
        );
    }
    Ok(match sol.status {
        PwStatus::Converged => EXIT_OK,
        PwStatus::Infeasible => EXIT_INFEASIBLE,
        PwStatus::Flagged => EXIT_NUMERICAL,
        PwStatus::NotCertified => EXIT_ITERATION_LIMIT,
    })
}

fn pairwise_json(theta: &[u64], gi: &fairwasp::GroupIndex) -> Value {
    let sums = group_sums(theta, gi);
    json!({
        "group_sums": sums,
        "conditionals": conditionals(&sums, gi),
        "pairwise_violation": pairwise_violation_sums(&sums, gi),
    })
}

fn read_weights(spec: &str, n: usize) -> Result<WeightVector> {
    let theta = if spec == "uniform" {
        WeightVector::uniform(n)
    } else {
        let file = File::open(spec).with_context(|| format!("opening {spec}"))?;
        WeightVector::read_csv(file).with_context(|| format!("reading weights {spec}"))?
    };
    if theta.len() != n {
        bail!("{} weights for {n} rows", theta.len());
    }
    Ok(theta)
}

pub fn verify(args: &VerifyArgs) -> Result<i32> {
    let ds = load(&args.input)?;
    let theta = read_weights(&args.weights, ds.n())?;
    let gi = group_index(&ds);
    let t = marginal_y(&ds);
    let sums = group_sums(theta.as_slice(), &gi);
    let cond = conditionals(&sums, &gi);
    let violation = fairness_violation_sums(&sums, &gi, &t, args.epsilon).ok();
    let pairwise = pairwise_violation_sums(&sums, &gi);
    let cm = build_constraints(&gi, &t, args.epsilon, false)?;
    let margins = cm.margins(&sums);

    if args.json {
        let groups: Vec<Value> = (0..gi.len())
            .map(|g| {
                json!({
                    "d": ds.d_values()[gi.group_d[g]],
                    "y": ds.y_values()[gi.group_y[g]],
                    "size": gi.groups[g].len(),
                    "weight": sums[g],
                })
            })
            .collect();
        let rows: Vec<Value> = cm
            .row_meta()
            .iter()
            .zip(&margins)
            .map(|(meta, a)| json!({ "row": format!("{meta:?}"), "margin": a }))
            .collect();
        let out = json!({
            "n": ds.n(),
            "epsilon": args.epsilon,
            "marginal_y": t.probs,
            "groups": groups,
            "conditionals": cond,
            "violation": violation,
            "pairwise_violation": pairwise,
            "margins": rows,
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(EXIT_OK);
    }

    let mut o = io::stdout().lock();
    writeln!(o, "n = {}, total weight = {}", ds.n(), theta.as_slice().iter().sum::<u64>())?;
    writeln!(o, "marginal p(y): {}", join(&t.probs))?;
    writeln!(o, "groups:")?;
    for (g, w) in sums.iter().enumerate() {
        writeln!(
            o,
            "  d={:<8} y={:<8} size {:>7}  weight {:>9}",
            ds.d_values()[gi.group_d[g]],
            ds.y_values()[gi.group_y[g]],
            gi.groups[g].len(),
            w
        )?;
    }
    writeln!(o, "conditionals p(y|d):")?;
    for (d, c) in cond.iter().enumerate() {
        match c {
            Some(c) => writeln!(o, "  d={:<8} {}", ds.d_values()[d], join(c))?,
            None => writeln!(o, "  d={:<8} undefined (zero weight)", ds.d_values()[d])?,
        }
    }
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    writeln!(o, "min constraint margin: {min_margin:.6e}")?;
    match violation {
        Some(v) => writeln!(o, "violation (epsilon {}): {v}", args.epsilon)?,
        None => writeln!(o, "violation (epsilon {}): undefined", args.epsilon)?,
    }
    writeln!(o, "pairwise violation: {pairwise}")?;
    Ok(EXIT_OK)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
}

pub fn materialize(args: &MaterializeArgs) -> Result<i32> {
    let mut rdr = csv::Reader::from_path(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let header = rdr.headers()?.clone();
    let records = rdr.records().collect::<Result<Vec<_>, _>>()?;
    let theta = read_weights(&args.weights.to_string_lossy(), records.len())?;
    let out = materialize_items(&records, &theta)?;
    let mut w = csv::Writer::from_path(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    w.write_record(&header)?;
    for r in &out {
        w.write_record(r)?;
    }
    w.flush()?;
    log::info!("wrote {} rows to {}", out.len(), args.out.display());
    Ok(EXIT_OK)
}

pub fn synth(args: &SynthArgs) -> Result<i32> {
    let ds = generate_synthetic(args.n, args.seed)?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    ds.write_csv(BufWriter::new(file))?;
    Ok(EXIT_OK)
}

pub fn bench(args: &BenchArgs) -> Result<i32> {
    if args.n_start < 2 || args.n_start > args.n_end {
        bail!("need 2 <= --n-start <= --n-end");
    }
    let cfg = FairwaspConfig {
        epsilon: args.epsilon,
        solver: SolverConfig {
            gap_tol: args.gap_tol,
            ..SolverConfig::default()
        },
        ..FairwaspConfig::default()
    };
    cfg.solver.validate()?;
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["n", "trial", "compress_s", "solve_s", "rel_gap", "violation"])?;
    let mut all_converged = true;
    let mut n = args.n_start;
    while n <= args.n_end {
        for trial in 0..args.trials {
            let ds = standardize(&generate_synthetic(n, args.seed + trial as u64)?);
            let gi = group_index(&ds);
            let t0 = Instant::now();
            let cc = compress_with(&ds, &gi, fairwasp::Metric::Euclidean);
            let compress_s = t0.elapsed().as_secs_f64();
            let problem = Problem {
                target: marginal_y(&ds),
                gi,
                cc,
            };
            let t1 = Instant::now();
            let sol = problem.solve(&cfg)?;
            let solve_s = t1.elapsed().as_secs_f64();
            if !sol.status.is_converged() {
                log::warn!("n = {n}, trial {trial}: {:?}", sol.status);
                all_converged = false;
            }
            w.write_record([
                n.to_string(),
                trial.to_string(),
                format!("{compress_s:.6}"),
                format!("{solve_s:.6}"),
                sol.rel_gap.to_string(),
                sol.violation.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
            w.flush()?;
        }
        n *= 2;
    }
    Ok(if all_converged { EXIT_OK } else { EXIT_ITERATION_LIMIT })
}

pub fn oracle(args: &OracleArgs) -> Result<i32> {
    let ds = load(&args.input)?;
    let view = cost_view(&args.input, &ds);
    let t = marginal_y(&ds);
    let out = match args.mode {
        OracleMode::Mip => {
            let r = brute_mip_with(&view, &t.probs, args.epsilon, args.input.metric)?;
            json!({ "objective": r.objective, "feasible_count": r.feasible_count,
                    "theta": r.theta.map(|w| w.into_inner()) })
        }
        OracleMode::Pairwise => {
            let r = brute_pairwise_mip_with(&view, args.epsilon, args.input.metric)?;
            json!({ "objective": r.objective, "feasible_count": r.feasible_count,
                    "theta": r.theta.map(|w| w.into_inner()) })
        }
        OracleMode::Lp => json!({ "objective": lp_optimum(&view, &t.probs, args.epsilon, args.input.metric)? }),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(EXIT_OK)
}
