//! Named end-to-end experiments. Each one runs a fixed battery of checks and
//! returns tables plus pass/fail verdicts.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use disjoint_core::arrangements::{
    count_pieces, is_general_position, piece_bound, Hyperplane, DEFAULT_ENUMERATION_BUDGET,
};
use disjoint_core::exact_calculus::{
    binomial, check_value_bound, diff, extend_y, frac_diff_equivalence, lagrange_coeff, reconstruct_coeffs,
    reconstruction_sides, sigma, BoundCheck, RationalSeq,
};
use disjoint_core::fixed::Scalar;
use disjoint_core::phase::{Phase, PhaseSpec};
use disjoint_core::phase_sums::{
    ap_correlation, build_concatenation, coefficient_grid, concatenation_residual, dirichlet_approx,
    short_interval_sup_average, weighted_average, power_oracle, BreakpointSchedule, DIRICHLET_BUDGET,
};
use disjoint_core::sieves::{
    encode_cache, load_cache, mertens, save_cache, sieve_mobius, sieve_phi, MobiusTable,
};
use disjoint_core::symbolic_blocks::{
    block_count_inequality_check, entropy_curve, example33_labels, index_blocks, indicator_s, load_sequence,
    prop32_bound, save_sequence, SymbolSeq,
};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Params;
use crate::error::LabError;
use crate::output::Table;
use crate::row;

pub struct PresetInfo {
    pub id: &'static str,
    pub about: &'static str,
    /// Parameter names the preset reads; anything else is rejected.
    pub accepts: &'static [&'static str],
    pub runtime_limit: Duration,
}

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

pub const PRESETS: &[PresetInfo] = &[
    PresetInfo {
        id: "appendix-a",
        about: "difference calculus: closed form, reconstruction identity, integrality, fractional equivalence",
        accepts: &["trials", "k", "j_max"],
        runtime_limit: secs(10),
    },
    PresetInfo {
        id: "value-bound",
        about: "|f(n+j)| <= (k+1) j^k c on random windows meeting the hypotheses",
        accepts: &["trials", "k", "j_max"],
        runtime_limit: secs(5),
    },
    PresetInfo {
        id: "lemma26-random",
        about: "piece counts of hyperplane arrangements against the recursive bound",
        accepts: &["trials", "m", "k"],
        runtime_limit: secs(60),
    },
    PresetInfo {
        id: "block-inequality",
        about: "block containment chains and |B_lJ| <= J |B_J^r|^(l+1) on random binary prefixes",
        accepts: &["trials", "n", "j_max", "l_max", "threshold"],
        runtime_limit: secs(30),
    },
    PresetInfo {
        id: "prop32",
        about: "block counts of 1_S for {sqrt2 y} < {sqrt3 y} against the polynomial bound",
        accepts: &["n", "j_max", "k"],
        runtime_limit: secs(120),
    },
    PresetInfo {
        id: "example33",
        about: "carry-pattern partition and piecewise second difference of sqrt3 n {sqrt2 n}",
        accepts: &["n"],
        runtime_limit: secs(30),
    },
    PresetInfo {
        id: "pnt-trend",
        about: "Mertens trace at decades and decay of mu-weighted exponential averages",
        accepts: &["n", "decades", "tau", "c", "accuracy"],
        runtime_limit: secs(180),
    },
    PresetInfo {
        id: "dirichlet",
        about: "simultaneous approximation certificates, re-evaluated at 256 bits",
        accepts: &["trials", "l_max", "q"],
        runtime_limit: secs(10),
    },
    PresetInfo {
        id: "lemma57",
        about: "mean square of mu along short progressions against log log h / log h",
        accepts: &["n", "h", "s"],
        runtime_limit: secs(120),
    },
    PresetInfo {
        id: "short-interval",
        about: "short-interval sup over a finite polynomial grid (lower-bound surrogate)",
        accepts: &["x", "h", "k", "density"],
        runtime_limit: secs(300),
    },
    PresetInfo {
        id: "round-trips",
        about: "sieve cache, sequence files, polynomial concatenations and diff after sigma",
        accepts: &["n", "trials"],
        runtime_limit: secs(10),
    },
];

pub fn find(id: &str) -> Result<&'static PresetInfo, LabError> {
    PRESETS.iter().find(|p| p.id == id).ok_or_else(|| {
        let ids: Vec<&str> = PRESETS.iter().map(|p| p.id).collect();
        LabError::usage(format!("unknown preset {id:?}; available: {}", ids.join(", ")))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    /// Exact statement; a failure is a bug.
    Exact,
    /// Finite-N trend gate with an empirical threshold.
    Trend,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn exact(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), kind: CheckKind::Exact, passed, detail: detail.into() }
    }

    fn trend(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), kind: CheckKind::Trend, passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PresetReport {
    pub preset: String,
    pub seed: u64,
    /// Resolved parameters, defaults included.
    pub parameters: Value,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub tables: Vec<(String, Table)>,
    pub summary: Value,
    /// Where the inputs came from: seeds, weight tables and their checksums, exact or irrational data.
    pub provenance: BTreeMap<String, String>,
    pub elapsed_secs: f64,
}

impl PresetReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn checks_table(&self) -> Table {
        let mut t = Table::new(&["check", "kind", "passed", "detail"]);
        for c in &self.checks {
            let kind = match c.kind {
                CheckKind::Exact => "exact",
                CheckKind::Trend => "trend",
            };
            t.push(row![c.name, kind, c.passed, c.detail]);
        }
        t
    }
}

/// Inputs shared by all presets.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub params: Params,
    pub seed: u64,
    pub mobius_cache: Option<PathBuf>,
}

struct Run {
    parameters: Value,
    checks: Vec<Check>,
    tables: Vec<(String, Table)>,
    summary: Value,
    provenance: BTreeMap<String, String>,
}

impl Run {
    fn new(parameters: Value) -> Self {
        Run { parameters, checks: Vec::new(), tables: Vec::new(), summary: Value::Null, provenance: BTreeMap::new() }
    }

    fn table(&mut self, name: &str, t: Table) {
        self.tables.push((name.to_string(), t));
    }
}

/// Rejects parameters the preset does not read.
pub fn validate(info: &PresetInfo, params: &Params) -> Result<(), LabError> {
    let extra: Vec<String> =
        params.set_fields().into_iter().filter(|f| !info.accepts.contains(&f.as_str())).collect();
    if !extra.is_empty() {
        return Err(LabError::usage(format!(
            "preset {} does not take {}; accepted: {}",
            info.id,
            extra.join(", "),
            info.accepts.join(", ")
        )));
    }
    Ok(())
}

pub fn run(id: &str, ctx: &Context) -> Result<PresetReport, LabError> {
    let info = find(id)?;
    validate(info, &ctx.params)?;
    let start = Instant::now();
    let mut run = match info.id {
        "appendix-a" => appendix_a(ctx)?,
        "value-bound" => value_bound(ctx)?,
        "lemma26-random" => lemma26(ctx)?,
        "block-inequality" => block_inequality(ctx)?,
        "prop32" => prop32(ctx)?,
        "example33" => example33(ctx)?,
        "pnt-trend" => pnt_trend(ctx)?,
        "dirichlet" => dirichlet(ctx)?,
        "lemma57" => lemma57(ctx)?,
        "short-interval" => short_interval(ctx)?,
        "round-trips" => round_trips(ctx)?,
        _ => unreachable!("preset table and dispatch disagree"),
    };
    run.provenance.insert("seed".into(), ctx.seed.to_string());
    Ok(PresetReport {
        preset: info.id.to_string(),
        seed: ctx.seed,
        parameters: run.parameters,
        checks: run.checks,
        tables: run.tables,
        summary: run.summary,
        provenance: run.provenance,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

fn require(cond: bool, msg: &str) -> Result<(), LabError> {
    if cond {
        Ok(())
    } else {
        Err(LabError::usage(msg))
    }
}

fn rng(ctx: &Context) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(ctx.seed)
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn rand_q(rng: &mut impl Rng) -> BigRational {
    q(rng.gen_range(-50..50), rng.gen_range(1..12))
}

/// Möbius table covering `[1, need]`, from the configured cache or sieved here.
fn mobius(ctx: &Context, need: u64, prov: &mut BTreeMap<String, String>) -> Result<MobiusTable, LabError> {
    let table = match &ctx.mobius_cache {
        Some(path) => {
            let t = load_cache(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
            if t.n_max() < need {
                return Err(LabError::usage(format!(
                    "cache {} covers n <= {}, the preset needs {need}",
                    path.display(),
                    t.n_max()
                )));
            }
            prov.insert("weights".into(), format!("cache:{}", path.display()));
            t
        }
        None => {
            prov.insert("weights".into(), "sieved".into());
            sieve_mobius(need)?
        }
    };
    prov.insert("sieve_n_max".into(), table.n_max().to_string());
    prov.insert("sieve_crc32".into(), format!("{:#010x}", table.checksum()));
    Ok(table)
}

fn appendix_a(ctx: &Context) -> Result<Run, LabError> {
    let p = &ctx.params;
    let trials = p.trials.unwrap_or(500);
    let k_max = p.k.unwrap_or(4);
    let j_max = p.j_max.unwrap_or(14);
    require(trials >= 1, "trials must be positive")?;
    require((1..=8).contains(&k_max), "k must lie in 1..=8")?;
    require(j_max > k_max + 1, "j_max must exceed k + 1")?;
    let mut run = Run::new(json!({ "trials": trials, "k": k_max, "j_max": j_max }));
    run.provenance.insert("inputs".into(), "exact rationals".into());
    let mut rng = rng(ctx);

    let mut closed_bad = 0u64;
    let mut recon_bad = 0u64;
    let mut coeff_bad = 0u64;
    let mut identities = 0u64;
    for _ in 0..trials {
        let k = rng.gen_range(1..=k_max);
        let len = rng.gen_range(k + 2..=j_max);
        let xs: Vec<BigRational> = (0..len).map(|_| rand_q(&mut rng)).collect();
        let seq = RationalSeq::new(xs.clone())?;
        let d = diff(&seq, k)?;
        for n in 0..d.len() {
            let mut s = BigRational::zero();
            for l in 0..=k {
                let term = BigRational::from_integer(binomial(k as u64, l as u64)) * &xs[n + l];
                if (k - l) % 2 == 1 {
                    s -= term;
                } else {
                    s += term;
                }
            }
            closed_bad += (d[n] != s) as u64;
        }
        for j in k..len {
            let cap = BigInt::from(j).pow(k as u32 - 1);
            for a in reconstruct_coeffs(j, k)? {
                coeff_bad += (a.is_negative() || a > cap) as u64;
            }
            for n in 0..len - j {
                let (lhs, rhs) = reconstruction_sides(&seq, n, k, j)?;
                recon_bad += (lhs != rhs) as u64;
                identities += 1;
            }
        }
    }
    run.checks.push(Check::exact("closed-form", closed_bad == 0, format!("{closed_bad} mismatches over {trials} sequences")));
    run.checks.push(Check::exact(
        "reconstruction",
        recon_bad == 0 && coeff_bad == 0,
        format!("{identities} identities, {recon_bad} failures, {coeff_bad} coefficients outside [0, j^(k-1)]"),
    ));

    let mut integral_bad = 0u64;
    let mut integral_cases = 0u64;
    for k in 1..=6usize {
        for j in 0..k as i64 {
            for n in 0..=40i64 {
                let mut prod = BigRational::one();
                for i in 0..k as i64 {
                    if i != j {
                        prod *= q(n - i, j - i);
                    }
                }
                let direct = lagrange_coeff(n, j, k)?;
                integral_bad += (!prod.is_integer() || prod != BigRational::from_integer(direct)) as u64;
                integral_cases += 1;
            }
        }
    }
    run.checks.push(Check::exact(
        "integrality",
        integral_bad == 0,
        format!("{integral_cases} cases (n <= 40, j < k <= 6), {integral_bad} failures"),
    ));

    let mut frac_table = Table::new(&["denominator", "k", "len", "cases", "both_true", "disagreements"]);
    let mut disagreements = 0u64;
    let mut cases = 0u64;
    for d in 1..=8i64 {
        for k in 1..=3usize {
            for len in k + 1..=6usize {
                let total = (d as u64).pow(len as u32);
                let (mut both, mut bad) = (0u64, 0u64);
                for code in 0..total {
                    let mut c = code;
                    let xs: Vec<BigRational> = (0..len)
                        .map(|_| {
                            let r = (c % d as u64) as i64;
                            c /= d as u64;
                            q(r, d)
                        })
                        .collect();
                    let (i, ii) = frac_diff_equivalence(&RationalSeq::new(xs)?, k)?;
                    bad += (i != ii) as u64;
                    both += (i && ii) as u64;
                }
                frac_table.push(row![d, k, len, total, both, bad]);
                disagreements += bad;
                cases += total;
            }
        }
    }
    run.checks.push(Check::exact(
        "fractional-equivalence",
        disagreements == 0,
        format!("{cases} windows with denominators <= 8, {disagreements} disagreements"),
    ));
    run.table("fractional_equivalence", frac_table);
    run.summary = json!({ "identities_checked": identities, "fractional_windows": cases });
    Ok(run)
}

fn value_bound(ctx: &Context) -> Result<Run, LabError> {
    let p = &ctx.params;
    let trials = p.trials.unwrap_or(1000);
    let k_max = p.k.unwrap_or(3);
    let len = p.j_max.unwrap_or(12);
    require(trials >= 1, "trials must be positive")?;
    require((1..=6).contains(&k_max), "k must lie in 1..=6")?;
    require(len > k_max, "j_max must exceed k")?;
    let mut run = Run::new(json!({ "trials": trials, "k": k_max, "j_max": len }));
    run.provenance.insert("inputs".into(), "exact rationals".into());
    let mut rng = rng(ctx);
    let mut tally = Table::new(&["k", "trials", "holds", "violated", "hypotheses_fail", "max_ratio"]);
    let mut failures = 0u64;
    for k in 1..=k_max {
        let (mut n, mut holds, mut violated, mut hyp) = (0u64, 0u64, 0u64, 0u64);
        let mut max_ratio = 0f64;
        for t in 0..trials {
            if (t as usize) % k_max + 1 != k {
                continue;
            }
            n += 1;
            let c = q(rng.gen_range(1..20), rng.gen_range(1..5));
            let init: Vec<BigRational> = (0..k).map(|_| &c * q(rng.gen_range(0..=16), 16)).collect();
            let g: Vec<BigRational> = (0..len - k).map(|_| &c * q(rng.gen_range(-16..=16), 16)).collect();
            let y = extend_y(&init, &g, len)?;
            match check_value_bound(&y, k, &c)? {
                BoundCheck::Holds => holds += 1,
                BoundCheck::Violated { .. } => violated += 1,
                BoundCheck::HypothesesFail => hyp += 1,
            }
            for j in k..len {
                let bound = disjoint_core::exact_calculus::value_bound(k as u32, &c, j as u64)?;
                let r = num_traits::ToPrimitive::to_f64(&(y[j].abs() / bound)).unwrap_or(f64::NAN);
                max_ratio = max_ratio.max(r);
            }
        }
        failures += violated + hyp;
        tally.push(row![k, n, holds, violated, hyp, max_ratio]);
    }
    run.checks.push(Check::exact(
        "bound-holds",
        failures == 0,
        format!("{trials} windows of length {len}, {failures} violations or hypothesis failures"),
    ));
    run.table("value_bound", tally);
    Ok(run)
}

fn random_hyperplanes(rng: &mut impl Rng, m: usize, k: usize, degenerate: bool) -> Vec<Hyperplane> {
    (0..m)
        .map(|_| loop {
            let h = if degenerate {
                let normal: Vec<i64> = (0..k).map(|_| rng.gen_range(-1..=1)).collect();
                Hyperplane::from_ints(&normal, rng.gen_range(-1..=1))
            } else {
                let normal = (0..k).map(|_| q(rng.gen_range(-6..=6), rng.gen_range(1..=4))).collect();
                Hyperplane::new(normal, q(rng.gen_range(-6..=6), rng.gen_range(1..=4)))
            };
            if let Ok(h) = h {
                break h;
            }
        })
        .collect()
}

fn lemma26(ctx: &Context) -> Result<Run, LabError> {
    let p = &ctx.params;
    let trials = p.trials.unwrap_or(200);
    let m_max = p.m.unwrap_or(8);
    let k_max = p.k.unwrap_or(3);
    require(trials >= 1, "trials must be positive")?;
    require((1..=12).contains(&m_max), "m must lie in 1..=12")?;
    require((1..=6).contains(&k_max), "k must lie in 1..=6")?;
    let mut run = Run::new(json!({ "trials": trials, "m": m_max, "k": k_max }));
    run.provenance.insert("inputs".into(), "exact rationals".into());

    let mut recursion_bad = 0;
    for m in 2..=30u64 {
        for k in 1..m {
            recursion_bad += (piece_bound(m, k) != piece_bound(m - 1, k) + 2 * piece_bound(m - 1, k - 1)) as u32;
        }
    }
    run.checks.push(Check::exact("recursion", recursion_bad == 0, format!("m <= 30, {recursion_bad} failures")));

    let fixed: [(&str, Vec<Hyperplane>, u64); 3] = [
        ("one hyperplane", vec![Hyperplane::from_ints(&[1], 0)?], 3),
        ("two points on a line", vec![Hyperplane::from_ints(&[1], 0)?, Hyperplane::from_ints(&[1], 1)?], 5),
        ("two crossing lines", vec![Hyperplane::from_ints(&[1, 0], 0)?, Hyperplane::from_ints(&[0, 1], 0)?], 9),
    ];
    let mut fixed_ok = true;
    let mut detail = Vec::new();
    for (name, arr, expect) in &fixed {
        let c = count_pieces(arr, DEFAULT_ENUMERATION_BUDGET, false)?.count;
        fixed_ok &= c == *expect;
        detail.push(format!("{name}: {c}"));
    }
    run.checks.push(Check::exact("fixed-examples", fixed_ok, detail.join("; ")));

    let mut rng = rng(ctx);
    let mut table = Table::new(&["trial", "m", "k", "general_position", "count", "bound"]);
    let mut over = 0u64;
    for trial in 0..trials {
        let m = rng.gen_range(1..=m_max);
        let k = rng.gen_range(1..=k_max);
        let arr = random_hyperplanes(&mut rng, m, k, trial % 2 == 1);
        let count = count_pieces(&arr, DEFAULT_ENUMERATION_BUDGET, false)?.count;
        let bound = piece_bound(m as u64, k as u64);
        over += (BigInt::from(count) > bound) as u64;
        table.push(row![trial, m, k, is_general_position(&arr)?, count, bound]);
    }
    run.checks.push(Check::exact("random-within-bound", over == 0, format!("{trials} arrangements, {over} over the bound")));
    run.table("arrangements", table);
    Ok(run)
}

fn random_binary(rng: &mut impl Rng, p: usize) -> Result<SymbolSeq, LabError> {
    Ok(SymbolSeq::new((0..p).map(|_| rng.gen_range(0..2)).collect(), 2)?)
}

fn block_inequality(ctx: &Context) -> Result<Run, LabError> {
    let p = &ctx.params;
    let trials = p.trials.unwrap_or(100);
    let len = p.n.unwrap_or(10_000) as usize;
    let j_max = p.j_max.unwrap_or(6);
    let l_max = p.l_max.unwrap_or(4);
    let thr = p.threshold.unwrap_or(2);
    require(trials >= 1, "trials must be positive")?;
    require(j_max >= 1 && l_max >= 1, "j_max and l_max must be positive")?;
    require((l_max + 1) * j_max <= len, "n must be at least (l_max + 1) j_max")?;
    require(thr >= 2, "threshold must be at least 2")?;
    let mut run =
        Run::new(json!({ "trials": trials, "n": len, "j_max": j_max, "l_max": l_max, "threshold": thr }));
    run.provenance.insert("inputs".into(), "pseudorandom binary prefixes".into());
    let mut rng = rng(ctx);
    let mut chain_bad = 0u64;
    // (J, l) -> (holding, max lhs, min rhs)
    let mut agg: BTreeMap<(usize, usize), (u64, u64, Option<BigUint>)> = BTreeMap::new();
    for _ in 0..trials {
        let seq = random_binary(&mut rng, len)?;
        for j in 1..=j_max {
            chain_bad += (!index_blocks(&seq, j, thr)?.containments_hold()) as u64;
            for l in 1..=l_max {
                let r = block_count_inequality_check(&seq, j, l)?;
                let rhs: BigUint = r.rhs.parse().expect("decimal");
                let e = agg.entry((j, l)).or_insert((0, 0, None));
                e.0 += r.holds as u64;
                e.1 = e.1.max(r.lhs);
                e.2 = Some(e.2.take().map_or(rhs.clone(), |m| m.min(rhs)));
            }
        }
    }
    let mut table = Table::new(&["J", "l", "trials_holding", "max_lhs", "min_rhs"]);
    let mut ineq_bad = 0u64;
    for ((j, l), (hold, lhs, rhs)) in &agg {
        ineq_bad += trials - hold;
        table.push(row![j, l, hold, lhs, rhs.as_ref().expect("set")]);
    }
    run.checks.push(Check::exact("containments", chain_bad == 0, format!("{chain_bad} broken chains")));
    run.checks.push(Check::exact(
        "inequality",
        ineq_bad == 0,
        format!("{} (J, l) pairs over {trials} prefixes, {ineq_bad} failures", agg.len()),
    ));
    run.table("inequality", table);
    Ok(run)
}

fn prop32(ctx: &Context) -> Result<Run, LabError> {
    let p = &ctx.params;
    let len = p.n.unwrap_or(1_000_000);
    let j_max = p.j_max.unwrap_or(18);
    let k = p.k.unwrap_or(2);
    const TREND_FROM: usize = 8;
    require(len >= 1, "n must be positive")?;
    require(j_max >= 1 && (j_max as u64) <= len, "j_max must lie in 1..=n")?;
    require(k >= 1, "k must be positive")?;
    let mut run = Run::new(json!({ "n": len, "j_max": j_max, "k": k }));
    run.provenance.insert("inputs".into(), "irrational (sqrt2, sqrt3), 96-bit certified".into());
    let p1 = Phase::polynomial(vec![Scalar::int(0), Scalar::sqrt(2)]);
    let p2 = Phase::polynomial(vec![Scalar::int(0), Scalar::sqrt(3)]);
    let (seq, ties) = indicator_s(&p1, &p2, len)?;
    let curve = entropy_curve(&seq, j_max, 2, 0)?;
    let mut table = Table::new(&[
        "J",
        "count_all",
        "count_regular",
        "count_effective",
        "count_reg_effective",
        "entropy_estimate",
        "bound",
    ]);
    let mut over = Vec::new();
    for r in &curve {
        let bound = prop32_bound(r.j as u64, k as u64);
        if BigUint::from(r.count_all) > bound {
            over.push(r.j);
        }
        table.push(row![
            r.j,
            r.count_all,
            r.count_regular,
            r.count_effective,
            r.count_reg_effective,
            r.entropy_estimate,
            bound
        ]);
    }
    run.checks.push(Check::exact("below-bound", over.is_empty(), format!("J <= {j_max}, over the bound at {over:?}")));
    // log c_{J+1} / (J+1) <= log c_J / J  <=>  c_{J+1}^J <= c_J^{J+1}, compared exactly
    let mut rises = Vec::new();
    for w in curve.windows(2).filter(|w| w[0].j >= TREND_FROM) {
        let (a, b) = (BigUint::from(w[0].count_all), BigUint::from(w[1].count_all));
        if num_traits::pow(b, w[0].j) > num_traits::pow(a, w[1].j) {
            rises.push(w[1].j);
        }
    }
    run.checks.push(Check::trend(
        "entropy-nonincreasing",
        rises.is_empty() && j_max > TREND_FROM,
        format!("log|B_J|/J for {TREND_FROM} <= J <= {j_max}, increases at {rises:?}"),
    ));
    run.summary = json!({ "near_ties": ties.near_ties.len(), "max_error_bound": ties.max_error_bound });
    run.table("blocks", table);
    Ok(run)
}

fn example33(ctx: &Context) -> Result<Run, LabError> {
    let len = ctx.params.n.unwrap_or(100_000);
    require(len >= 3, "n must be at least 3")?;
    let mut run = Run::new(json!({ "n": len }));
    run.provenance.insert("inputs".into(), "irrational (sqrt2, sqrt3), 96-bit fraction in a 192-bit word".into());
    let (_, r) = example33_labels(len)?;
    let total: u64 = r.case_counts.iter().sum();
    run.checks.push(Check::exact(
        "partition",
        r.unlabeled == 0 && r.multiply_labeled == 0 && total == len,
        format!("{} unlabeled, {} multiply labeled, {total} of {len} labeled once", r.unlabeled, r.multiply_labeled),
    ));
    run.checks.push(Check::exact(
        "residual",
        r.max_residual <= 1e-9,
        format!("max residual {:e} at n = {}", r.max_residual, r.argmax),
    ));
    let mut table = Table::new(&["case", "count"]);
    for (i, c) in r.case_counts.iter().enumerate() {
        table.push(row![i + 1, c]);
    }
    run.table("cases", table);
    run.summary = serde_json::to_value(&r)?;
    Ok(run)
}

fn pnt_trend(ctx: &Context) -> Result<Run, LabError> {
    let p = &ctx.params;
    let n = p.n.unwrap_or(1_000_000);
    let mut decades = p.decades.clone().unwrap_or_else(|| vec![3, 4, 5, 6, 7]);
    decades.sort_unstable();
    decades.dedup();
    require(n > 10_000, "n must exceed 10^4")?;
    require(!decades.is_empty() && decades.iter().all(|&d| (1..=10).contains(&d)), "decades must lie in 1..=10")?;
    let tau = p.tau.unwrap_or(0.7);
    let c = p.c.unwrap_or(2.0);
    let accuracy = p.accuracy.unwrap_or(1.0);
    let schedule = BreakpointSchedule::DecayDriven { tau, c, accuracy };
    schedule.breakpoints(2, 2)?;
    let mut run = Run::new(json!({ "n": n, "decades": decades, "tau": tau, "c": c, "accuracy": accuracy }));
    let top = 10u64.pow(*decades.last().expect("nonempty")).max(n);
    let mu = mobius(ctx, top, &mut run.provenance)?;

    let mut trace = Table::new(&["N", "M(N)", "abs_ratio"]);
    let mut ratios = Vec::new();
    for &d in &decades {
        let big_n = 10u64.pow(d);
        let m = mertens(&mu, big_n)?;
        let ratio = m.unsigned_abs() as f64 / big_n as f64;
        ratios.push((big_n, ratio));
        trace.push(row![big_n, m, ratio]);
    }
    let bumps: Vec<String> =
        ratios.windows(2).filter(|w| w[1].1 >= w[0].1).map(|w| format!("{} -> {}", w[0].0, w[1].0)).collect();
    run.checks.push(Check::trend(
        "mertens-decreasing",
        bumps.is_empty(),
        format!("|M(N)|/N strictly decreasing; fails at {bumps:?}"),
    ));
    run.table("mertens", trace);

    let mut points: Vec<u64> = decades.iter().map(|&d| 10u64.pow(d)).filter(|&x| x <= n).collect();
    points.extend([10_000, n]);
    points.sort_unstable();
    points.dedup();
    // the concatenation (degree < 2 pieces of n^{3/2}) is reported without a gate
    let concat = build_concatenation(power_oracle(3, 2, Scalar::int(1)), 2, &schedule, n + 1)?;
    let phases = [
        ("sqrt2", Phase::polynomial(vec![Scalar::int(0), Scalar::sqrt(2)]), true),
        ("pow3/2", PhaseSpec::Power { num: 3, den: 2, coefficient: Scalar::int(1) }.build(n), true),
        ("concat-k2", concat, false),
    ];
    let mut sums = Table::new(&["phase", "N", "re", "im", "modulus"]);
    for (name, phase, gated) in &phases {
        let r = weighted_average(&mu, phase, n, &points)?;
        for c in &r.checkpoints {
            sums.push(row![name, c.n, c.re, c.im, c.modulus]);
        }
        if *gated {
            let (a, b) = (r.at(10_000).expect("checkpoint").modulus, r.last().modulus);
            run.checks.push(Check::trend(
                &format!("decay-{name}"),
                b * 2.0 <= a,
                format!("|avg| at 10^4 = {a:.3e}, at {n} = {b:.3e}, ratio {:.2}", a / b),
            ));
        }
    }
    run.provenance.insert("inputs".into(), "irrational phases, 96-bit certified".into());
    run.table("averages", sums);
    Ok(run)
}

fn dirichlet(ctx: &Context) -> Result<Run, LabError> {
    let p = &ctx.params;
    let trials = p.trials.unwrap_or(100);
    let l_max = p.l_max.unwrap_or(2);
    let q_max = p.q.unwrap_or(8);
    require(trials >= 1, "trials must be positive")?;
    require((1..=4).contains(&l_max), "l_max must lie in 1..=4")?;
    require(q_max >= 2, "q must be at least 2")?;
    let mut run = Run::new(json!({ "trials": trials, "l_max": l_max, "q": q_max }));
    run.provenance.insert("inputs".into(), "mixed rationals and square roots".into());
    let mut rng = rng(ctx);
    let mut table = Table::new(&["trial", "q", "theta", "t", "a", "max_err"]);
    let (mut bad, mut over_t) = (0u64, 0u64);
    const BITS: usize = 256;
    let one = BigInt::one() << BITS;
    for trial in 0..trials {
        let l = rng.gen_range(1..=l_max);
        let qq: u64 = rng.gen_range(2..=q_max);
        // (numerator, denominator) or a radicand
        let raw: Vec<Result<(i64, i64), u64>> = (0..l)
            .map(|_| if rng.gen_bool(0.5) { Ok((rng.gen_range(-50..50), rng.gen_range(1..30))) } else { Err(rng.gen_range(2..50)) })
            .collect();
        let thetas: Vec<Scalar> = raw
            .iter()
            .map(|r| match *r {
                Ok((n, d)) => Scalar::rational(n, d),
                Err(r) => Scalar::sqrt(r),
            })
            .collect();
        let cert = dirichlet_approx(&thetas, qq, DIRICHLET_BUDGET)?;
        over_t += (cert.t < 1 || cert.t > qq.pow(l as u32)) as u64;
        let t = BigInt::from(cert.t);
        for (r, a) in raw.iter().zip(cert.a_int()) {
            let ok = match *r {
                // |t n/d - a| <= 1/q  <=>  q |t n - a d| <= d
                Ok((n, d)) => (&t * n - &a * d).abs() * qq <= BigInt::from(d),
                // S = ⌊√r 2^256⌋, so t√r 2^256 lies in [tS, tS + t)
                Err(r) => {
                    let s = BigInt::from((BigUint::from(r) << (2 * BITS)).sqrt());
                    ((&t * s - &a * &one).abs() + &t) * qq <= one
                }
            };
            bad += !ok as u64;
        }
        let labels: Vec<String> = thetas.iter().map(|s| s.to_string()).collect();
        table.push(row![trial, qq, labels.join(" "), cert.t, cert.a.join(" "), cert.max_err]);
    }
    run.checks.push(Check::exact(
        "certificates",
        bad == 0 && over_t == 0,
        format!("{trials} vectors, {bad} coordinates fail re-evaluation, {over_t} t out of [1, q^L]"),
    ));
    run.table("certificates", table);
    Ok(run)
}

fn lemma57(ctx: &Context) -> Result<Run, LabError> {
    let p = &ctx.params;
    let n = p.n.unwrap_or(1_000_000);
    let s = p.s.unwrap_or(1);
    let mut hs = p.h.clone().unwrap_or_else(|| vec![10, 100, 1000]);
    hs.sort_unstable();
    hs.dedup();
    require(n >= 1 && s >= 1, "n and s must be positive")?;
    require(!hs.is_empty() && hs[0] >= 3, "every h must be at least 3")?;
    let mut run = Run::new(json!({ "n": n, "s": s, "h": hs }));
    let top = n + hs.last().expect("nonempty") * s;
    let mu = mobius(ctx, top, &mut run.provenance)?;
    let phi = sieve_phi(s)?;
    let mut table = Table::new(&["h", "value", "comparison", "ratio"]);
    let mut values = Vec::new();
    for &h in &hs {
        let r = ap_correlation(&mu, &Phase::zero(), s, h, n, &phi)?;
        table.push(row![h, r.value, r.comparison, r.value / r.comparison]);
        values.push((h, r.value, r.comparison));
    }
    let decreasing = values.windows(2).all(|w| w[1].1 < w[0].1);
    run.checks.push(Check::trend(
        "decreasing-in-h",
        decreasing,
        values.iter().map(|(h, v, _)| format!("h={h}: {v:.3e}")).collect::<Vec<_>>().join(", "),
    ));
    let above: Vec<u64> = values.iter().filter(|(_, v, c)| *v >= 10.0 * c).map(|t| t.0).collect();
    run.checks.push(Check::trend("below-comparison", above.is_empty(), format!("value >= 10 x comparison at h in {above:?}")));
    run.table("correlation", table);
    Ok(run)
}

fn short_interval(ctx: &Context) -> Result<Run, LabError> {
    let p = &ctx.params;
    let x = p.x.unwrap_or(100_000);
    let k = p.k.unwrap_or(2);
    let density = p.density.unwrap_or(16);
    let mut hs = p.h.clone().unwrap_or_else(|| vec![10, 100]);
    hs.sort_unstable();
    hs.dedup();
    require(x >= 1, "x must be positive")?;
    require(!hs.is_empty() && hs[0] >= 1, "every h must be positive")?;
    require(k >= 1 && density >= 1, "k and density must be positive")?;
    require((density as u64).checked_pow(k as u32).is_some_and(|f| f <= 1 << 16), "density^k must stay below 65536")?;
    let mut run = Run::new(json!({ "x": x, "h": hs, "k": k, "density": density }));
    let mu = mobius(ctx, 2 * x + hs.last().expect("nonempty"), &mut run.provenance)?;
    run.provenance.insert("inputs".into(), "exact rational coefficient grid".into());
    let family = coefficient_grid(k, density);
    let mut table = Table::new(&["h", "family_size", "value", "bound_kind"]);
    let mut values = Vec::new();
    for &h in &hs {
        let r = short_interval_sup_average(&mu, &family, x, h)?;
        table.push(row![h, r.family_size, r.value, r.bound_kind]);
        values.push((h, r.value));
    }
    run.checks.push(Check::trend(
        "decreasing-in-h",
        values.windows(2).all(|w| w[1].1 < w[0].1),
        values.iter().map(|(h, v)| format!("h={h}: {v:.4}")).collect::<Vec<_>>().join(", "),
    ));
    run.summary = json!({ "bound_kind": "finite-family lower bound" });
    run.table("short_interval", table);
    Ok(run)
}

fn round_trips(ctx: &Context) -> Result<Run, LabError> {
    let p = &ctx.params;
    let n = p.n.unwrap_or(100_000);
    let trials = p.trials.unwrap_or(50);
    require(n >= 1 && trials >= 1, "n and trials must be positive")?;
    let mut run = Run::new(json!({ "n": n, "trials": trials }));
    let scratch = tempfile::tempdir()?;
    let mut rng = rng(ctx);

    let mu = sieve_mobius(n)?;
    let path = scratch.path().join("mu.bin");
    save_cache(&mu, &path)?;
    let back = load_cache(&path)?;
    let same = back == mu && std::fs::read(&path)? == encode_cache(&mu) && encode_cache(&back) == encode_cache(&mu);
    run.checks.push(Check::exact("sieve-cache", same, format!("n_max = {n}, crc32 {:#010x}", mu.checksum())));

    let seq = random_binary(&mut rng, 4096)?;
    let seq_path = scratch.path().join("seq.bin");
    save_sequence(&seq, &seq_path)?;
    let seq_ok = load_sequence(&seq_path)? == seq;
    run.checks.push(Check::exact("sequence-file", seq_ok, "4096 binary symbols"));

    let mut concat_bad = 0u64;
    for _ in 0..trials {
        let k = rng.gen_range(1..=4usize);
        let cs: Vec<BigRational> = (0..k).map(|_| q(rng.gen_range(-20..20), rng.gen_range(1..9))).collect();
        let f = move |m: u64| {
            let y = BigRational::from_integer(BigInt::from(m));
            Scalar::Rational(cs.iter().rev().fold(BigRational::zero(), |acc, c| acc * &y + c))
        };
        let schedule = BreakpointSchedule::Geometric { first_gap: rng.gen_range(1..6), ratio: rng.gen_range(1.1..2.5) };
        let g = build_concatenation(&f, k, &schedule, 500)?;
        concat_bad += !concatenation_residual(&f, &g, 0..500)?.exact_zero as u64;
    }
    run.checks.push(Check::exact(
        "polynomial-concatenation",
        concat_bad == 0,
        format!("{trials} polynomials of degree < 4 on [0, 500), {concat_bad} nonzero residuals"),
    ));

    let mut sigma_bad = 0u64;
    for _ in 0..trials {
        let len = rng.gen_range(1..20);
        let xs: Vec<BigRational> = (0..len).map(|_| rand_q(&mut rng)).collect();
        let s = sigma(&xs, rand_q(&mut rng));
        sigma_bad += (diff(&s, 1)?.values() != &xs[..]) as u64;
    }
    run.checks.push(Check::exact("diff-sigma", sigma_bad == 0, format!("{trials} sequences, {sigma_bad} mismatches")));
    run.provenance.insert("inputs".into(), "exact rationals and a sieved table".into());
    Ok(run)
}
