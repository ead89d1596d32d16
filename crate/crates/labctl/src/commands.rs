use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use disjoint_core::arrangements::{count_pieces, count_report, parse_csv, parse_json};
use disjoint_core::fixed::Scalar;
use disjoint_core::phase::{parse_phase, Phase, PhaseSpec};
use disjoint_core::phase_sums::{
    ap_correlation, build_concatenation, coefficient_grid, concatenation_residual, dirichlet_approx,
    log_checkpoints, power_oracle, shift_self_correlation, short_interval_sup_average, unit, weighted_average,
    BreakpointSchedule,
};
use disjoint_core::sieves::{
    encode_cache, load_cache, mertens, save_cache, sieve_liouville, sieve_mobius, sieve_mobius_with_budget,
    sieve_phi, DEFAULT_MEMORY_BUDGET,
};
use disjoint_core::symbolic_blocks::{entropy_curve, example33_labels, indicator_s, load_sequence, save_sequence, SymbolSeq};
use disjoint_core::weights::{ArithmeticWeight, Constant, ResidueMasked};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::json;

use crate::cli::*;
use crate::config::{ExperimentConfig, Format};
use crate::error::LabError;
use crate::output::{json_string, write_json, Table};
use crate::presets::{self, CheckKind, Context, PRESETS};
use crate::row;

pub fn run(cli: Cli) -> Result<(), LabError> {
    match cli.command {
        Command::Sieve(a) => sieve(a),
        Command::Verify(a) => verify(a),
        Command::Sum(a) => sum(a),
        Command::Entropy(a) => entropy(a),
        Command::Pieces(a) => pieces(a),
        Command::Dirichlet(a) => dirichlet(a),
        Command::Correlate(c) => match c {
            CorrelateCommand::Ap(a) => correlate_ap(a),
            CorrelateCommand::Short(a) => correlate_short(a),
            CorrelateCommand::Shift(a) => correlate_shift(a),
            CorrelateCommand::Concat(a) => correlate_concat(a),
        },
        Command::Experiment(a) => experiment(a),
    }
}

fn sieve(a: SieveArgs) -> Result<(), LabError> {
    let table = sieve_mobius_with_budget(a.n, a.memory_budget.unwrap_or(DEFAULT_MEMORY_BUDGET))?;
    save_cache(&table, &a.out).map_err(|e| LabError::Io(format!("{}: {e}", a.out.display())))?;
    if let Some(path) = &a.aux_csv {
        let lam = sieve_liouville(a.n)?;
        let phi = sieve_phi(a.n)?;
        let mut t = Table::new(&["n", "mu", "liouville", "phi"]);
        for n in 1..=a.n {
            t.push(row![n, table.get(n), lam.get(n), phi.get(n)]);
        }
        t.write(path)?;
    }
    println!("n_max={}", table.n_max());
    println!("mertens={}", mertens(&table, table.n_max())?);
    println!("bytes={}", encode_cache(&table).len());
    println!("crc32={:#010x}", table.checksum());
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<(), LabError> {
    let table = load_cache(&a.cache).map_err(|e| LabError::Io(format!("{}: {e}", a.cache.display())))?;
    println!("n_max={}", table.n_max());
    println!("mertens={}", mertens(&table, table.n_max())?);
    println!("crc32={:#010x}", table.checksum());
    if a.recompute {
        let fresh = sieve_mobius(table.n_max())?;
        if encode_cache(&fresh) != std::fs::read(&a.cache)? {
            return Err(LabError::Invariant(format!("{} differs from a fresh sieve", a.cache.display())));
        }
        println!("recompute=identical");
    }
    Ok(())
}

/// `mu`, `liouville` and `one` are sieved or built for `[1, need]`; anything else is a cache path.
fn load_weights(spec: &str, need: u64) -> Result<Box<dyn ArithmeticWeight>, LabError> {
    Ok(match spec {
        "mu" => Box::new(sieve_mobius(need)?),
        "liouville" => Box::new(sieve_liouville(need)?),
        "one" => Box::new(Constant::one(need)),
        path => Box::new(load_cache(Path::new(path)).map_err(|e| LabError::Io(format!("{path}: {e}")))?),
    })
}

fn load_phase(text: &str, n_end: u64) -> Result<Phase, LabError> {
    Ok(parse_phase(text, Path::new("."))?.build(n_end))
}

/// Writes the table and the JSON report where requested; with neither, the CSV goes to stdout.
fn emit<T: Serialize>(out: &OutputArgs, table: &Table, report: &T) -> Result<(), LabError> {
    if let Some(p) = &out.out_csv {
        table.write(p)?;
    }
    if let Some(p) = &out.out_json {
        write_json(p, report)?;
    }
    if out.out_csv.is_none() && out.out_json.is_none() {
        print!("{}", String::from_utf8(table.to_csv()?).expect("utf-8"));
    }
    Ok(())
}

fn sum(a: SumArgs) -> Result<(), LabError> {
    if let (Some(m), Some(r)) = (a.mask_modulus, a.mask_residue) {
        if r >= m {
            return Err(LabError::usage(format!("--mask-residue {r} must be below --mask-modulus {m}")));
        }
    }
    let phase = load_phase(&a.phase, a.n)?;
    let w = load_weights(&a.weights, a.n)?;
    let cps = log_checkpoints(a.n, a.checkpoints);
    let report = match (a.mask_modulus, a.mask_residue) {
        (Some(modulus), Some(residue)) => {
            weighted_average(&ResidueMasked { inner: &*w, modulus, residue }, &phase, a.n, &cps)?
        }
        _ => weighted_average(&*w, &phase, a.n, &cps)?,
    };
    let mut t = Table::new(&["n", "re", "im", "modulus"]);
    for c in &report.checkpoints {
        t.push(row![c.n, c.re, c.im, c.modulus]);
    }
    emit(&a.out, &t, &report)
}

fn entropy(a: EntropyArgs) -> Result<(), LabError> {
    let mut ties = None;
    let seq = match (&a.seq, a.source) {
        (Some(path), _) => load_sequence(path)?,
        (None, Some(SequenceSource::Indicator)) => {
            let (s, t) = indicator_s(&load_phase(&a.p1, a.p)?, &load_phase(&a.p2, a.p)?, a.p)?;
            ties = Some(t);
            s
        }
        (None, Some(SequenceSource::Example33)) => example33_labels(a.p)?.0,
        (None, Some(SequenceSource::Random)) => {
            if a.alphabet == 0 {
                return Err(LabError::usage("--alphabet must be positive"));
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
            SymbolSeq::new((0..a.p).map(|_| rng.gen_range(0..a.alphabet)).collect(), a.alphabet)?
        }
        (None, None) => unreachable!("clap requires an input"),
    };
    if let Some(p) = &a.save_seq {
        save_sequence(&seq, p)?;
    }
    let curve = entropy_curve(&seq, a.jmax as usize, a.threshold, a.tail_start)?;
    let mut t = Table::new(&[
        "J",
        "count_all",
        "count_regular",
        "count_effective",
        "count_reg_effective",
        "entropy_estimate",
    ]);
    for r in &curve {
        t.push(row![r.j, r.count_all, r.count_regular, r.count_effective, r.count_reg_effective, r.entropy_estimate]);
    }
    if let Some(tr) = &ties {
        if !tr.near_ties.is_empty() {
            eprintln!("warning: {} near-ties between the two fractional parts", tr.near_ties.len());
        }
    }
    let report = json!({
        "length": seq.len(),
        "alphabet_size": seq.alphabet_size(),
        "threshold": a.threshold,
        "tail_start": a.tail_start,
        "rows": curve,
        "ties": ties,
    });
    emit(&a.out, &t, &report)
}

fn pieces(a: PiecesArgs) -> Result<(), LabError> {
    let format = a.format.unwrap_or_else(|| match a.arrangement.extension().and_then(|e| e.to_str()) {
        Some("json") => ArrangementFormat::Json,
        _ => ArrangementFormat::Csv,
    });
    let io = |e: std::io::Error| LabError::Io(format!("{}: {e}", a.arrangement.display()));
    let arr = match format {
        ArrangementFormat::Json => parse_json(&std::fs::read_to_string(&a.arrangement).map_err(io)?)?,
        ArrangementFormat::Csv => parse_csv(BufReader::new(File::open(&a.arrangement).map_err(io)?))?,
    };
    let report = count_report(&arr, a.budget)?;
    let mut value = serde_json::to_value(&report)?;
    if a.witnesses {
        let w = count_pieces(&arr, a.budget, true)?.witnesses.unwrap_or_default();
        value["witnesses"] = w
            .iter()
            .map(|(s, p)| json!({ "signs": s.to_string(), "point": p.iter().map(|x| x.to_string()).collect::<Vec<_>>() }))
            .collect();
    }
    match &a.out_json {
        Some(p) => write_json(p, &value)?,
        None => print!("{}", json_string(&value)?),
    }
    Ok(())
}

/// Splits a comma list of scalars, naming the offending token on failure.
fn parse_scalar_list(text: &str) -> Result<Vec<Scalar>, LabError> {
    let mut pos = 0;
    let mut out = Vec::new();
    for tok in text.split(',') {
        let s = tok.trim().parse::<Scalar>().map_err(|e| {
            LabError::usage(format!("parse error at position {pos}: {e} (token {:?})", tok))
        })?;
        out.push(s);
        pos += tok.len() + 1;
    }
    Ok(out)
}

fn dirichlet(a: DirichletArgs) -> Result<(), LabError> {
    let thetas = parse_scalar_list(&a.theta)?;
    let r = dirichlet_approx(&thetas, a.q, a.budget)?;
    let value = json!({
        "theta": thetas.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "q": r.q,
        "t": r.t,
        "a": r.a,
        "max_err": r.max_err,
    });
    match &a.out_json {
        Some(p) => write_json(p, &value)?,
        None => print!("{}", json_string(&value)?),
    }
    Ok(())
}

fn correlate_ap(a: ApArgs) -> Result<(), LabError> {
    if a.h.iter().any(|&h| h < 3) {
        return Err(LabError::usage("every --h must be at least 3"));
    }
    let top = a.n + a.h.iter().max().expect("required") * a.s;
    let w = load_weights(&a.weights, top)?;
    let phase = load_phase(&a.phase, top)?;
    let phi = sieve_phi(a.s)?;
    let mut t = Table::new(&["h", "value", "comparison"]);
    let mut reports = Vec::new();
    for &h in &a.h {
        let r = ap_correlation(&*w, &phase, a.s, h, a.n, &phi)?;
        t.push(row![h, r.value, r.comparison]);
        reports.push(r);
    }
    emit(&a.out, &t, &json!({ "weights": w.id(), "phase": phase.describe(), "rows": reports }))
}

fn correlate_short(a: ShortArgs) -> Result<(), LabError> {
    if a.h.contains(&0) || a.k == 0 || a.density == 0 {
        return Err(LabError::usage("--h, --k and --density must be positive"));
    }
    if (a.density as u64).checked_pow(a.k as u32).is_none_or(|f| f > 1 << 20) {
        return Err(LabError::Resource(format!("a grid of {}^{} phases is too large", a.density, a.k)));
    }
    let w = load_weights(&a.weights, 2 * a.x + a.h.iter().max().expect("required"))?;
    let family = coefficient_grid(a.k, a.density);
    let mut t = Table::new(&["h", "family_size", "value", "bound_kind"]);
    let mut reports = Vec::new();
    for &h in &a.h {
        let r = short_interval_sup_average(&*w, &family, a.x, h)?;
        t.push(row![h, r.family_size, r.value, r.bound_kind]);
        reports.push(r);
    }
    emit(&a.out, &t, &json!({ "weights": w.id(), "k": a.k, "density": a.density, "rows": reports }))
}

fn correlate_shift(a: ShiftArgs) -> Result<(), LabError> {
    let top = a.n + *a.shift.iter().max().expect("required") as u64;
    let w = load_weights(&a.weights, top)?;
    let phase = load_phase(&a.phase, top)?;
    let z = (1..=top)
        .map(|n| {
            let wn = w.weight(n);
            Ok(if wn == 0 { Complex64::new(0.0, 0.0) } else { unit(phase.frac_f64(n)?) * wn as f64 })
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    let mut t = Table::new(&["shift", "value"]);
    let mut rows = Vec::new();
    for &s in &a.shift {
        let v = shift_self_correlation(&z, s, a.n as usize)?;
        t.push(row![s, v]);
        rows.push(json!({ "shift": s, "value": v }));
    }
    emit(&a.out, &t, &json!({ "weights": w.id(), "phase": phase.describe(), "n": a.n, "rows": rows }))
}

fn correlate_concat(a: ConcatArgs) -> Result<(), LabError> {
    let (num, den) = match a.power.split_once('/') {
        Some((p, q)) => (p.trim().parse::<u32>(), q.trim().parse::<u32>()),
        None => (a.power.trim().parse::<u32>(), Ok(1)),
    };
    let (Ok(num), Ok(den @ 1..)) = (num, den) else {
        return Err(LabError::usage(format!("--power {:?} is not p/q with q >= 1", a.power)));
    };
    let coefficient = parse_scalar_list(&a.coefficient)?.remove(0);
    let schedule = match a.schedule {
        ScheduleKind::Decay => BreakpointSchedule::DecayDriven { tau: a.tau, c: a.c, accuracy: a.accuracy },
        ScheduleKind::Geometric => BreakpointSchedule::Geometric { first_gap: a.first_gap, ratio: a.ratio },
    };
    let f = power_oracle(num, den, coefficient.clone());
    let g = build_concatenation(&f, a.k, &schedule, a.n_end)?;
    let Phase::Concatenation(c) = &g else { unreachable!("concatenation builder") };
    let residual = concatenation_residual(&f, &g, (0..a.n_end).step_by(a.stride as usize))?;
    let mut t = Table::new(&["quantity", "value"]);
    t.push(row!["pieces", c.pieces().len()]);
    t.push(row!["last_gap", a.n_end - c.breakpoints().last().expect("nonempty")]);
    t.push(row!["samples", residual.samples]);
    t.push(row!["max_distance", residual.max_distance]);
    t.push(row!["argmax", residual.argmax]);
    let mut report = json!({
        "power": format!("{num}/{den}"),
        "coefficient": coefficient.to_string(),
        "k": a.k,
        "schedule": schedule,
        "pieces": c.pieces().len(),
        "residual": residual,
    });
    if let Some(spec) = &a.weights {
        let n = a.n_end - 1;
        let w = load_weights(spec, n)?;
        let direct = PhaseSpec::Power { num, den, coefficient }.build(n);
        let rf = weighted_average(&*w, &direct, n, &[])?;
        let rg = weighted_average(&*w, &g, n, &[])?;
        t.push(row!["avg_modulus_f", rf.last().modulus]);
        t.push(row!["avg_modulus_g", rg.last().modulus]);
        report["average_f"] = serde_json::to_value(rf.last())?;
        report["average_g"] = serde_json::to_value(rg.last())?;
    }
    emit(&a.out, &t, &report)
}

fn experiment(a: ExperimentArgs) -> Result<(), LabError> {
    if a.list {
        for p in PRESETS {
            println!("{:<18} {}", p.id, p.about);
        }
        return Ok(());
    }
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.parameters.overlay(&a.overrides.to_params());
    if a.seed.is_some() {
        cfg.seed = a.seed;
    }
    if a.weights_cache.is_some() {
        cfg.weights.cache = a.weights_cache.clone();
    }
    if a.out.is_some() {
        cfg.output.dir = a.out.clone();
    }
    let id = a.preset.clone().or(cfg.experiment.clone()).ok_or_else(|| {
        LabError::usage("no preset given (positional argument or `experiment` in the config file)")
    })?;
    if let (Some(cli), Some(file)) = (&a.preset, &cfg.experiment) {
        if cli != file {
            eprintln!("note: preset {cli:?} overrides {file:?} from the config file");
        }
    }
    let info = presets::find(&id)?;
    presets::validate(info, &cfg.parameters)?;
    let dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("labctl-out").join(info.id));
    let ctx = Context { params: cfg.parameters.clone(), seed: cfg.seed(), mobius_cache: cfg.weights.cache.clone() };
    let report = presets::run(info.id, &ctx)?;
    write_bundle(&dir, &report, &cfg.formats())?;

    for c in &report.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {}: {}", c.name, c.detail);
    }
    println!("bundle: {}", dir.display());
    let broken: Vec<&str> =
        report.checks.iter().filter(|c| !c.passed && c.kind == CheckKind::Exact).map(|c| c.name.as_str()).collect();
    if !broken.is_empty() {
        return Err(LabError::Invariant(format!("exact checks failed: {}", broken.join(", "))));
    }
    Ok(())
}

/// `report.json`, `manifest.json` and one CSV per table.
pub fn write_bundle(dir: &Path, report: &presets::PresetReport, formats: &[Format]) -> Result<(), LabError> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    if formats.contains(&Format::Csv) {
        report.checks_table().write(&dir.join("checks.csv"))?;
        files.push("checks.csv".to_string());
        for (name, t) in &report.tables {
            let file = format!("{name}.csv");
            t.write(&dir.join(&file))?;
            files.push(file);
        }
    }
    if formats.contains(&Format::Json) {
        write_json(&dir.join("report.json"), report)?;
        files.push("report.json".into());
    }
    let manifest = json!({
        "preset": report.preset,
        "parameters": report.parameters,
        "seed": report.seed,
        "versions": {
            "labctl": env!("CARGO_PKG_VERSION"),
            "disjoint-core": disjoint_core::VERSION,
        },
        "provenance": report.provenance,
        "passed": report.passed(),
        "elapsed_secs": report.elapsed_secs,
        "files": files,
    });
    write_json(&dir.join("manifest.json"), &manifest)
}
