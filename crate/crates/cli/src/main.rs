mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use partial_bgg::linalg::rat;
use partial_bgg::flat::{FlatModel, OrderRow, OrderStatus, VerifyOptions};
use partial_bgg::normalization::Normalizer;
use partial_bgg::report::CheckResult;
use partial_bgg::{ComplexOptions, GradedLieAlgebra, KostantComplex};
use serde::Serialize;
use serde_json::{json, Value};

use config::{Format, RunArgs, RunConfig, UsageError};

#[derive(Parser, Debug)]
#[command(name = "partial-bgg", version, about = "Kostant Hodge theory and partial BGG on |1|-graded Lie algebras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dimensions, grading element, Killing form and structural checks.
    AlgebraInfo {
        #[command(flatten)]
        run: RunArgs,
        /// Also dump the full basis and Killing matrix.
        #[arg(long)]
        full: bool,
    },
    /// Kostant homology table with the Hodge and inverse-Laplacian checks.
    Homology {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Verify the splitting and BGG sequence on the flat model.
    BggVerify {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check that `ker ∂` on `L(g_-1, g_0)` is exactly `ad(g_1)`.
    Rigidity {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Normalize random torsions and curvatures and report the checks.
    Normalize {
        #[command(flatten)]
        run: RunArgs,
    },
}

impl Command {
    fn slug(&self) -> &'static str {
        match self {
            Command::AlgebraInfo { .. } => "algebra-info",
            Command::Homology { .. } => "homology",
            Command::BggVerify { .. } => "bgg-verify",
            Command::Rigidity { .. } => "rigidity",
            Command::Normalize { .. } => "normalize",
        }
    }

    fn run_args(&self) -> &RunArgs {
        match self {
            Command::AlgebraInfo { run, .. }
            | Command::Homology { run }
            | Command::BggVerify { run }
            | Command::Rigidity { run }
            | Command::Normalize { run } => run,
        }
    }
}

/// Rendered output plus the verdict that decides the exit code.
struct Outcome {
    json: Value,
    csv: String,
    pass: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_usage(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn is_usage(err: &anyhow::Error) -> bool {
    err.is::<UsageError>()
        || matches!(
            err.downcast_ref::<partial_bgg::Error>(),
            Some(partial_bgg::Error::InvalidParameters(_))
        )
}

fn run(command: &Command) -> anyhow::Result<bool> {
    let cfg = command.run_args().resolve()?;
    if cfg.inject_sign_bug && !matches!(command, Command::Homology { .. } | Command::BggVerify { .. }) {
        return Err(UsageError(format!("--inject-sign-bug is not supported by {}", command.slug())).into());
    }
    let outcome = match command {
        Command::AlgebraInfo { full, .. } => algebra_info(&cfg, *full)?,
        Command::Homology { .. } => homology(&cfg)?,
        Command::BggVerify { .. } => bgg_verify(&cfg)?,
        Command::Rigidity { .. } => rigidity(&cfg)?,
        Command::Normalize { .. } => normalize(&cfg)?,
    };
    let text = match cfg.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&outcome.json)?;
            s.push('\n');
            s
        }
        Format::Csv => outcome.csv,
    };
    emit(&cfg, command.slug(), &text)?;
    Ok(outcome.pass)
}

fn output_path(cfg: &RunConfig, slug: &str) -> Option<PathBuf> {
    if let Some(path) = &cfg.output {
        return Some(path.clone());
    }
    let dir = cfg.output_dir.as_ref()?;
    let params: String = cfg
        .family
        .params()
        .chars()
        .filter_map(|c| match c {
            '=' => None,
            ';' => Some('-'),
            c => Some(c),
        })
        .collect();
    let rep = match slug {
        "algebra-info" | "rigidity" | "normalize" => String::new(),
        _ => format!("-{}", cfg.rep.name()),
    };
    Some(dir.join(format!(
        "{slug}-{}-{params}{rep}.{}",
        cfg.family.name(),
        cfg.format.extension()
    )))
}

fn emit(cfg: &RunConfig, slug: &str, text: &str) -> anyhow::Result<()> {
    match output_path(cfg, slug) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn csv_string<T: Serialize>(rows: &[T]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Serialize)]
struct CheckCsvRow<'a> {
    family: &'a str,
    params: &'a str,
    check: &'a str,
    status: &'a str,
}

fn checks_csv(cfg: &RunConfig, checks: &[CheckResult]) -> anyhow::Result<String> {
    let params = cfg.family.params();
    let rows: Vec<_> = checks
        .iter()
        .map(|c| CheckCsvRow {
            family: cfg.family.name(),
            params: &params,
            check: &c.name,
            status: if c.passed() { "pass" } else { "fail" },
        })
        .collect();
    csv_string(&rows)
}

fn build_algebra(cfg: &RunConfig) -> anyhow::Result<Arc<GradedLieAlgebra>> {
    Ok(Arc::new(cfg.family.build()?))
}

fn build_complex(cfg: &RunConfig) -> anyhow::Result<Arc<KostantComplex>> {
    let rep = Arc::new(cfg.rep.build(build_algebra(cfg)?)?);
    let options = ComplexOptions {
        inject_sign_bug: cfg.inject_sign_bug,
    };
    Ok(Arc::new(KostantComplex::with_options(rep, options)))
}

/// `c` with `B(X, Y) = c tr(XY)` on the defining matrices, if it exists.
fn trace_form_ratio(alg: &GradedLieAlgebra) -> Option<String> {
    let basis = alg.basis();
    let gram = alg.killing_gram();
    let mut ratio = None;
    for (i, bi) in basis.iter().enumerate() {
        for (j, bj) in basis.iter().enumerate() {
            let t = (bi * bj).trace();
            let k = &gram[(i, j)];
            if t == rat(0) {
                if *k != t {
                    return None;
                }
                continue;
            }
            let r = k / &t;
            match &ratio {
                None => ratio = Some(r),
                Some(c) if *c == r => {}
                Some(_) => return None,
            }
        }
    }
    ratio.map(|r| r.to_string())
}

fn algebra_info(cfg: &RunConfig, full: bool) -> anyhow::Result<Outcome> {
    let alg = build_algebra(cfg)?;
    let (d_minus, d_zero, d_plus) = alg.graded_dims();
    let e = alg.grading_element();
    let b_ee = alg.killing_form(&e, &e)?;
    let invariants = alg.check_invariants();
    let killing_rank = alg.killing_gram().rank();
    let ratio = trace_form_ratio(&alg);
    let mut json = json!({
        "schema": "partial-bgg.algebra-info/1",
        "family": cfg.family.name(),
        "params": cfg.family.params(),
        "dim": alg.dim(),
        "matrix_size": alg.matrix_size(),
        "graded_dims": [d_minus, d_zero, d_plus],
        "grading_element": {
            "index": alg.grading_index(),
            "eigenvalues": [
                {"eigenvalue": -1, "multiplicity": d_minus},
                {"eigenvalue": 0, "multiplicity": d_zero},
                {"eigenvalue": 1, "multiplicity": d_plus},
            ],
        },
        "killing": {
            "rank": killing_rank,
            "b_ee": b_ee.to_string(),
            "trace_form_ratio": ratio,
        },
        "invariants": invariants,
        "all_pass": invariants.all_pass(),
    });
    if full {
        json["descriptor"] = serde_json::to_value(alg.descriptor())?;
    }
    let params = cfg.family.params();
    let mut rows: Vec<(&str, String)> = vec![
        ("family", cfg.family.name().into()),
        ("params", params),
        ("dim", alg.dim().to_string()),
        ("matrix_size", alg.matrix_size().to_string()),
        ("dim_g_minus", d_minus.to_string()),
        ("dim_g_zero", d_zero.to_string()),
        ("dim_g_plus", d_plus.to_string()),
        ("grading_index", alg.grading_index().to_string()),
        ("killing_rank", killing_rank.to_string()),
        ("b_ee", b_ee.to_string()),
        ("trace_form_ratio", ratio.clone().unwrap_or_default()),
    ];
    for (name, ok) in [
        ("jacobi", invariants.jacobi),
        ("grading_closure", invariants.grading_closure),
        ("grading_element", invariants.grading_element),
        ("killing_ad_trace", invariants.killing_ad_trace),
        ("killing_nondegenerate", invariants.killing_nondegenerate),
        ("dual_pairing", invariants.dual_pairing),
    ] {
        rows.push((name, if ok { "pass".into() } else { "fail".into() }));
    }
    #[derive(Serialize)]
    struct Row<'a> {
        key: &'a str,
        value: &'a str,
    }
    let csv = csv_string(&rows.iter().map(|(k, v)| Row { key: k, value: v }).collect::<Vec<_>>())?;
    Ok(Outcome {
        json,
        csv,
        pass: invariants.all_pass(),
    })
}

#[derive(Serialize)]
struct HomologyCsvRow<'a> {
    family: &'a str,
    params: &'a str,
    rep: &'a str,
    k: usize,
    dim_chain: usize,
    dim_im_d: usize,
    dim_harmonic: usize,
    dim_im_dstar: usize,
}

fn homology(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let complex = build_complex(cfg)?;
    let report = complex.suite_report();
    let params = cfg.family.params();
    let rows: Vec<_> = report
        .rows
        .iter()
        .map(|r| HomologyCsvRow {
            family: cfg.family.name(),
            params: &params,
            rep: cfg.rep.name(),
            k: r.k,
            dim_chain: r.dim_chain,
            dim_im_d: r.dim_im_d,
            dim_harmonic: r.dim_harmonic,
            dim_im_dstar: r.dim_im_dstar,
        })
        .collect();
    let csv = csv_string(&rows)?;
    let mut json = json!({ "schema": "partial-bgg.homology/1" });
    merge(&mut json, serde_json::to_value(&report)?);
    Ok(Outcome {
        json,
        csv,
        pass: report.all_pass,
    })
}

fn merge(target: &mut Value, source: Value) {
    if let (Value::Object(t), Value::Object(s)) = (target, source) {
        t.extend(s);
    }
}

#[derive(Serialize)]
struct OrderCsvRow<'a> {
    family: &'a str,
    params: &'a str,
    rep: &'a str,
    kind: Value,
    k: usize,
    source_slice: usize,
    target_slice: Option<usize>,
    expected: i64,
    measured: Option<u32>,
    status: Value,
}

fn bgg_verify(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let complex = build_complex(cfg)?;
    let model = FlatModel::new(complex, cfg.transverse, cfg.degree_cap)?;
    let report = model.verify_complex(&VerifyOptions {
        samples: cfg.samples,
        seed: cfg.seed,
        test_degree: cfg.test_degree,
    });
    let (table, table_error): (Vec<OrderRow>, Option<String>) = match model.order_table() {
        Ok(t) => (t, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let orders_pass = table_error.is_none() && table.iter().all(|r| r.status != OrderStatus::Fail);
    let all_pass = report.all_pass && orders_pass;
    let mut json = json!({ "schema": "partial-bgg.bgg-verify/1" });
    merge(&mut json, serde_json::to_value(&report)?);
    json["order_table"] = serde_json::to_value(&table)?;
    json["order_table_error"] = serde_json::to_value(&table_error)?;
    json["orders_pass"] = json!(orders_pass);
    json["all_pass"] = json!(all_pass);
    let params = cfg.family.params();
    let rows = table
        .iter()
        .map(|r| {
            Ok(OrderCsvRow {
                family: cfg.family.name(),
                params: &params,
                rep: cfg.rep.name(),
                kind: serde_json::to_value(r.kind)?,
                k: r.k,
                source_slice: r.source_slice,
                target_slice: r.target_slice,
                expected: r.expected,
                measured: r.measured,
                status: serde_json::to_value(r.status)?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let csv = csv_string(&rows)?;
    Ok(Outcome { json, csv, pass: all_pass })
}

fn rigidity(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let normalizer = Normalizer::new(build_algebra(cfg)?)?;
    let report = normalizer.check_prolongation_rigidity()?;
    let pass = report.passes();
    let json = json!({
        "schema": "partial-bgg.rigidity/1",
        "family": cfg.family.name(),
        "params": cfg.family.params(),
        "rigidity": report,
        "all_pass": pass,
    });
    let check = CheckResult::from_bool("prolongation_rigidity", pass, Value::Null, || Value::Null);
    let csv = checks_csv(cfg, &[check])?;
    Ok(Outcome { json, csv, pass })
}

fn normalize(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let normalizer = Normalizer::new(build_algebra(cfg)?)?;
    let report = normalizer.batch_report(cfg.samples, cfg.seed);
    let mut json = json!({ "schema": "partial-bgg.normalize/1" });
    merge(&mut json, serde_json::to_value(&report)?);
    let csv = checks_csv(cfg, &report.checks)?;
    Ok(Outcome {
        json,
        csv,
        pass: report.all_pass,
    })
}
