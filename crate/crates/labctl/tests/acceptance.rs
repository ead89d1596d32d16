//! Acceptance run: one line per criterion, each backed by an experiment preset.
//!
//! A criterion passes when every check of its preset passes within the time
//! limit. Checks listed in `KNOWN_UNATTAINABLE` fail on the true data; they are
//! still reported as FAIL, and the run insists that they keep failing so a
//! change in behavior is noticed.

use std::process::ExitCode;

use disjoint_core::sieves::{save_cache, sieve_mobius};
use labctl::config::{Params, DEFAULT_SEED};
use labctl::presets::{self, Context};

/// `(criterion, check)`: |M(N)|/N is 0.002 at 10^3 and 0.0023 at 10^4
/// (M(10^3) = 2, M(10^4) = -23), so strict decrease over 10^3..10^6 cannot hold.
const KNOWN_UNATTAINABLE: &[(u32, &str)] = &[(7, "mertens-decreasing")];

struct Criterion {
    number: u32,
    preset: &'static str,
    params: Params,
}

fn criteria() -> Vec<Criterion> {
    let c = |number, preset| Criterion { number, preset, params: Params::default() };
    vec![
        c(1, "appendix-a"),
        c(2, "value-bound"),
        c(3, "lemma26-random"),
        c(4, "block-inequality"),
        c(5, "prop32"),
        c(6, "example33"),
        Criterion { number: 7, preset: "pnt-trend", params: Params { decades: Some(vec![3, 4, 5, 6]), ..Params::default() } },
        c(8, "dirichlet"),
        c(9, "lemma57"),
        c(10, "short-interval"),
        c(11, "round-trips"),
    ]
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temp dir");
    // criterion 7 runs against a cached sieve
    let cache = scratch.path().join("mu.bin");
    save_cache(&sieve_mobius(1_000_000).expect("sieve"), &cache).expect("cache");

    let mut unexpected = Vec::new();
    for cr in criteria() {
        let info = presets::find(cr.preset).expect("preset");
        let ctx = Context {
            params: cr.params,
            seed: DEFAULT_SEED,
            mobius_cache: (cr.number == 7).then(|| cache.clone()),
        };
        let report = match presets::run(cr.preset, &ctx) {
            Ok(r) => r,
            Err(e) => {
                println!("criterion {:>2} [{}]: FAIL error: {e}", cr.number, cr.preset);
                unexpected.push(format!("criterion {} errored", cr.number));
                continue;
            }
        };
        let in_time = report.elapsed_secs < info.runtime_limit.as_secs_f64();
        let ok = report.passed() && in_time;
        println!(
            "criterion {:>2} [{}]: {} ({:.2}s, limit {}s)",
            cr.number,
            cr.preset,
            if ok { "PASS" } else { "FAIL" },
            report.elapsed_secs,
            info.runtime_limit.as_secs()
        );
        if !in_time {
            unexpected.push(format!("criterion {} exceeded its time limit", cr.number));
        }
        for check in &report.checks {
            let known = KNOWN_UNATTAINABLE.contains(&(cr.number, check.name.as_str()));
            if !check.passed {
                println!("    failed check {}: {}{}", check.name, check.detail, if known { " (known unattainable)" } else { "" });
                if !known {
                    unexpected.push(format!("criterion {} check {}", cr.number, check.name));
                }
            } else if known {
                unexpected.push(format!("criterion {} check {} now passes; revisit KNOWN_UNATTAINABLE", cr.number, check.name));
            }
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all checks as expected");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected results: {}", unexpected.join("; "));
        ExitCode::FAILURE
    }
}
