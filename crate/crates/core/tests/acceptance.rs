// SPDX-License-Identifier: Apache-2.0

//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the console.

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::{xor_task, XorWorld};
use hdlflow::backend::{FnBackend, GenerationParams, Llm, PromptSet};
use hdlflow::classify::{deduce_type_from_code, Classifier, Deduction};
use hdlflow::cli::{cmd_run, RunArgs};
use hdlflow::comb::{emit_verilog, evaluate_sop, exhaustive_testbench, header_for_table, minimize_all, Cell, SopExpression, TruthTable};
use hdlflow::domain::{BudgetConfig, CodeSample, DatasetSplit, PassRate, Procedure, SearchMode, SearchState, Task, TestOutcome};
use hdlflow::eval::{pass_at_k, pass_at_k_exact, RunReport};
use hdlflow::search::run_task;
use hdlflow::sequ::{accept_or_assemble, parse_stt, ColumnRole, SttCell};
use hdlflow::sim::{FnSimulator, IcarusConfig, IcarusSimulator, SampleSlot, Simulator, TableOracleSimulator};
use hdlflow::verilog::{lex, parse_header};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances and sizes.
const PASSK_MAX_N: u64 = 12;
const PASSK_FLOAT_TOL: f64 = 1e-12;
const PASSK_TIME_LIMIT: Duration = Duration::from_secs(10);
const MINIMIZER_RANDOM_TABLES: usize = 500;
const MINIMIZER_TIME_LIMIT: Duration = Duration::from_secs(60);
const EMIT_RANDOM_TABLES: usize = 60;
const SEED: u64 = 0x5eed_2024;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1. Pass@k closed form against subset enumeration.

fn passk_equivalence() -> Check {
    let start = Instant::now();
    let mut cases = 0;
    for n in 1..=PASSK_MAX_N {
        // popcount of every n-bit mask, reused across c and k
        let masks: Vec<u32> = (0u32..1 << n).collect();
        for c in 0..=n {
            let passing = (1u32 << c) - 1;
            for k in 1..=n {
                let (mut hit, mut all) = (0i64, 0i64);
                for &m in &masks {
                    if m.count_ones() as u64 == k {
                        all += 1;
                        hit += i64::from(m & passing != 0);
                    }
                }
                let brute = BigRational::new(BigInt::from(hit), BigInt::from(all));
                let exact = pass_at_k_exact(n, c, k).map_err(|e| e.to_string())?;
                ensure(exact == brute, || format!("n={n} c={c} k={k}: {exact} != {brute}"))?;
                let approx = pass_at_k(n, c, k).map_err(|e| e.to_string())?;
                let want = hit as f64 / all as f64;
                ensure((approx - want).abs() <= PASSK_FLOAT_TOL, || format!("n={n} c={c} k={k}: {approx} vs {want}"))?;
                cases += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < PASSK_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{cases} (n, c, k) cases exact, {elapsed:.2?}"))
}

// 2. Minimizer soundness and primality.

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("i{i}")).collect()
}

fn assignment<'a>(inputs: &'a [String], row: &[Cell]) -> BTreeMap<&'a str, bool> {
    inputs.iter().map(String::as_str).zip(row.iter().map(|c| *c == Cell::One)).collect()
}

/// Every care row agrees with the expression, and dropping any literal from
/// any product makes it cover a row whose output is 0.
fn check_minimized(table: &TruthTable, exprs: &[SopExpression]) -> Result<(), String> {
    let inputs = table.inputs();
    let n = inputs.len();
    for (o, expr) in exprs.iter().enumerate() {
        let off: Vec<&Vec<Cell>> = table.rows().iter().filter(|r| r[n + o] == Cell::Zero).collect();
        for row in table.rows() {
            let want = match row[n + o] {
                Cell::Zero => false,
                Cell::One => true,
                Cell::DontCare => continue,
            };
            let got = evaluate_sop(expr, &assignment(inputs, row)).map_err(|e| e.to_string())?;
            ensure(got == want, || format!("{}: wrong on row {row:?}", expr.output))?;
        }
        for term in &expr.terms {
            for drop in 0..term.len() {
                let reduced: Vec<_> = term.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, l)| l).collect();
                let hits_off = off.iter().any(|row| {
                    let a = assignment(inputs, row);
                    reduced.iter().all(|l| a[l.input.as_str()] == l.positive)
                });
                ensure(hits_off, || format!("{}: term {term:?} is not prime", expr.output))?;
            }
        }
    }
    Ok(())
}

fn row(n: usize, pattern: u64, outs: &[Cell]) -> Vec<Cell> {
    let mut r: Vec<Cell> = (0..n).map(|i| if pattern >> (n - 1 - i) & 1 == 1 { Cell::One } else { Cell::Zero }).collect();
    r.extend_from_slice(outs);
    r
}

fn random_table(rng: &mut ChaCha8Rng, n: usize, outputs: usize, drop_rows: bool) -> TruthTable {
    let mut rows = Vec::new();
    for p in 0..1u64 << n {
        if drop_rows && rng.gen_bool(0.1) {
            continue;
        }
        let outs: Vec<Cell> = (0..outputs)
            .map(|_| match rng.gen_range(0..10) {
                0..=3 => Cell::Zero,
                4..=7 => Cell::One,
                _ => Cell::DontCare,
            })
            .collect();
        rows.push(row(n, p, &outs));
    }
    let outs = (0..outputs).map(|j| format!("y{j}")).collect();
    TruthTable::new(names(n), outs, rows).expect("generated table is valid")
}

fn minimizer_soundness() -> Check {
    let start = Instant::now();
    for f in 0u32..256 {
        let rows = (0..8u64)
            .map(|p| row(3, p, &[if f >> p & 1 == 1 { Cell::One } else { Cell::Zero }]))
            .collect();
        let table = TruthTable::new(names(3), vec!["y0".into()], rows).expect("valid");
        let exprs = minimize_all(&table).map_err(|e| format!("function {f}: {e}"))?;
        check_minimized(&table, &exprs).map_err(|e| format!("function {f}: {e}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for t in 0..MINIMIZER_RANDOM_TABLES {
        let n = rng.gen_range(4..=6);
        let outputs = rng.gen_range(1..=2);
        let table = random_table(&mut rng, n, outputs, t % 4 == 3);
        let exprs = minimize_all(&table).map_err(|e| format!("table {t}: {e}"))?;
        check_minimized(&table, &exprs).map_err(|e| format!("table {t} ({n} inputs): {e}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < MINIMIZER_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("256 three-input functions + {MINIMIZER_RANDOM_TABLES} random tables, {elapsed:.2?}"))
}

// 3. Emitted modules under exhaustive testbenches.

fn emitted_verilog_correctness() -> Check {
    let scratch = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (sim, which): (Box<dyn Simulator>, &str) = match IcarusSimulator::new(IcarusConfig::new(scratch.path())) {
        Ok(s) => (Box::new(s), "iverilog"),
        Err(_) => (Box::new(TableOracleSimulator), "table oracle (iverilog not installed)"),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let mut mutants_caught = 0;
    for t in 0..EMIT_RANDOM_TABLES {
        let n = rng.gen_range(1..=4);
        let outputs = rng.gen_range(1..=3);
        let mut table = random_table(&mut rng, n, outputs, false);
        if t % 2 == 1 {
            // vector ports
            let ins = (0..n).map(|i| format!("in[{}]", n - 1 - i)).collect();
            let outs = (0..outputs).map(|j| format!("out[{j}]")).collect();
            table = TruthTable::new(ins, outs, table.rows().to_vec()).expect("renamed table is valid");
        }
        let header = header_for_table(&table);
        let exprs = minimize_all(&table).map_err(|e| e.to_string())?;
        let verilog = emit_verilog(&header, &exprs).map_err(|e| format!("table {t}: {e}"))?;
        let task = Task {
            id: format!("emit{t}"),
            spec_text: String::new(),
            testbench_src: exhaustive_testbench(&header, &table).map_err(|e| e.to_string())?,
            module_header: header.clone(),
            dataset_split: DatasetSplit::Human,
        };
        let sample = |src: String| CodeSample {
            verilog_src: src,
            producing_procedure: Procedure::Comb,
            info_list_id: None,
            iteration: 1,
        };
        let outcome = sim
            .run_testbench(&sample(verilog.clone()), &task, SampleSlot { index: 0 })
            .map_err(|e| e.to_string())?;
        ensure(outcome.passed(), || format!("table {t}: {}/{} on\n{verilog}", outcome.passed_samples, outcome.total_samples))?;
        // negating an output with a care row must be noticed
        let first_out = &table.outputs()[0];
        let has_care = table.rows().iter().any(|r| r[n] != Cell::DontCare);
        if has_care {
            let line_start = format!("\tassign {first_out} = ");
            let mutant: String = verilog
                .lines()
                .map(|l| match l.strip_prefix(&line_start).and_then(|r| r.strip_suffix(';')) {
                    Some(rhs) => format!("{line_start}~({rhs});\n"),
                    None => format!("{l}\n"),
                })
                .collect();
            let o = sim.run_testbench(&sample(mutant), &task, SampleSlot { index: 1 }).map_err(|e| e.to_string())?;
            ensure(!o.passed(), || format!("table {t}: negated output still passes"))?;
            mutants_caught += 1;
        }
    }
    Ok(format!("{EMIT_RANDOM_TABLES} tables pass via {which}; {mutants_caught} negated outputs rejected"))
}

// 4. Search policy.

fn search(world: &XorWorld, score: impl Fn(u32) -> (u64, u64) + Send + Sync) -> Result<SearchState, String> {
    let backend = FnBackend(|r: &_| world.reply(r));
    let prompts = PromptSet::defaults();
    let llm = Llm::new(&backend, &prompts, GenerationParams::default());
    let sim = FnSimulator(|_: &_, _: &_, slot: SampleSlot| {
        let (m, n) = score(slot.index);
        Ok(TestOutcome::from_counts(m, n).expect("valid counts"))
    });
    run_task(&xor_task("xor"), &BudgetConfig::default(), &llm, &Classifier::new(), &sim).map_err(|e| e.to_string())
}

fn list_at(s: &SearchState, i: usize) -> &str {
    s.executed_samples[i].sample.info_list_id.as_deref().unwrap_or("")
}

fn procs(s: &SearchState) -> Vec<Procedure> {
    s.executed_samples.iter().map(|e| e.sample.producing_procedure).collect()
}

fn search_policy() -> Check {
    // (a) all-fail: 10 runs, then top-2 and top-1 by (score, origin, id)
    let s = search(&XorWorld::new(0, false), |_| (0, 20))?;
    ensure(s.executed_samples.len() == 10, || format!("(a) {} executions", s.executed_samples.len()))?;
    let mut first: Vec<&str> = (0..7).map(|i| list_at(&s, i)).collect();
    first.sort();
    first.dedup();
    ensure(first.len() == 7, || "(a) iteration 1 reused a list".into())?;
    ensure(list_at(&s, 7) == first[0] && list_at(&s, 8) == first[1], || "(a) iteration 2 did not use the top two".into())?;
    ensure(list_at(&s, 9) == first[0], || "(a) iteration 3 did not use the top one".into())?;
    let want: Vec<Procedure> = [[Procedure::Comb; 7].as_slice(), &[Procedure::Behav; 3]].concat();
    ensure(procs(&s) == want, || format!("(a) procedures {:?}", procs(&s)))?;
    // graded scores make the ranking visible
    let s = search(&XorWorld::new(0, false), |i| (if i < 7 { u64::from(i) } else { 0 }, 20))?;
    let top2 = [list_at(&s, 6), list_at(&s, 5)];
    ensure([list_at(&s, 7), list_at(&s, 8)] == top2, || "(a) graded iteration 2 selection".into())?;
    ensure(list_at(&s, 9) == list_at(&s, 4), || "(a) graded iteration 3 selection".into())?;

    // (b) p = 0.96 at slot 2 pins the procedure and list
    let s = search(&XorWorld::new(0, false), |i| if i == 2 { (24, 25) } else { (1, 25) })?;
    let pinned = list_at(&s, 2);
    for i in 3..10 {
        let e = &s.executed_samples[i];
        ensure(e.mode == SearchMode::ShortCut, || format!("(b) slot {i} mode {:?}", e.mode))?;
        ensure(e.sample.producing_procedure == Procedure::Comb, || format!("(b) slot {i} procedure"))?;
        ensure(list_at(&s, i) == pinned, || format!("(b) slot {i} list"))?;
    }

    // (c) 11 format errors: Fail-safe, BEHAV on a fresh list every time
    let s = search(&XorWorld::new(11, false), |_| (0, 20))?;
    ensure(s.format_errors == 11, || format!("(c) {} format errors", s.format_errors))?;
    ensure(s.executed_samples.len() == 10, || "(c) budget not spent".into())?;
    let mut ids: Vec<&str> = (0..10).map(|i| list_at(&s, i)).collect();
    ensure(
        s.executed_samples.iter().all(|e| e.mode == SearchMode::FailSafe && e.sample.producing_procedure == Procedure::Behav),
        || "(c) a sample outside Fail-safe BEHAV".into(),
    )?;
    ids.sort();
    ids.dedup();
    ensure(ids.len() == 10, || "(c) a list was reused".into())?;

    // (d) each list's history is its samples' pass rates, score their exact mean
    let s = search(&XorWorld::new(0, false), |i| (u64::from(i * 3 % 7), 7))?;
    for l in &s.cluster {
        let rates: Vec<PassRate> = s
            .executed_samples
            .iter()
            .filter(|e| e.sample.info_list_id.as_deref() == Some(l.id.as_str()))
            .map(|e| e.outcome.pass_rate())
            .collect();
        ensure(l.history() == rates.as_slice(), || format!("(d) history of {}", l.id))?;
        let mean = rates.iter().fold(BigRational::zero(), |a, p| a + p.ratio()) / BigRational::from_integer(BigInt::from(rates.len()));
        ensure(l.score() == &mean, || format!("(d) score of {}: {} vs {mean}", l.id, l.score()))?;
    }
    Ok("(a) schedule and top-C selection, (b) Short-cut, (c) Fail-safe, (d) exact running means".into())
}

// 5. Three-always-block merge fallback.

const SHIFT_HEADER: &str = "module top_module (\n\tinput clk,\n\tinput enable,\n\tinput S,\n\tinput A, B, C,\n\toutput reg Z\n);";
const STATE_REGISTER: &str = "always @(posedge clk) begin\n\tif(enable) begin\n\t\tQ <= nextState;\n\tend\nend";
const NEXT_STATE: &str = "always @(Q, S) begin\n\tnextState = {Q[6:0], S};\nend";
const OUTPUT_LOGIC: &str = "always @(Q, A, B, C) begin\n\tcase({A, B, C})\n\t\t3'b000: Z = Q[0];\n\t\t3'b001: Z = Q[1];\n\t\t3'b010: Z = Q[2];\n\t\t3'b011: Z = Q[3];\n\t\t3'b100: Z = Q[4];\n\t\t3'b101: Z = Q[5];\n\t\t3'b110: Z = Q[6];\n\t\t3'b111: Z = Q[7];\n\tendcase\nend";

fn merge_fallback() -> Check {
    let blocks = [STATE_REGISTER, NEXT_STATE, OUTPUT_LOGIC];
    // the model drops the output block, so the merge is assembled locally
    let reply = format!("```verilog\n{SHIFT_HEADER}\n{STATE_REGISTER}\n{NEXT_STATE}\nendmodule\n```");
    let merged = accept_or_assemble(&reply, SHIFT_HEADER, &blocks).map_err(|e| e.to_string())?;
    ensure(merged.fallback, || "reply was accepted".into())?;
    let v = &merged.verilog;
    for b in blocks {
        ensure(v.contains(b), || format!("block missing verbatim:\n{b}\nin\n{v}"))?;
    }
    let toks = lex(v);
    let count = |w: &str| toks.iter().filter(|t| t.is(w)).count();
    ensure(count("module") == 1 && count("endmodule") == 1, || "module/endmodule unbalanced".into())?;
    ensure(v.contains("reg [7:0] Q;") && v.contains("reg [7:0] nextState;"), || format!("declarations missing:\n{v}"))?;
    ensure(deduce_type_from_code(v) == Deduction::Sequential, || "not classified sequential".into())?;
    Ok("fallback module keeps all three blocks and deduces Sequential".into())
}

// 6. State-transition table parsing.

const BYTE_FSM_TABLE: &str = "Sure, we can define a state machine with four states: IDLE, BYTE1, BYTE2, and BYTE3. Here's the state transition table:
    | Current State | in[3] | reset | Next State | done |
    |---------------|-------|-------|------------|------|
    | IDLE          | 0     | 0     | IDLE       | 0    |
    | IDLE          | 0     | 1     | IDLE       | 0    |
    | IDLE          | 1     | 0     | BYTE1      | 0    |
    | IDLE          | 1     | 1     | IDLE       | 0    |
    | BYTE1         | X     | 0     | BYTE2      | 0    |
    | BYTE1         | X     | 1     | IDLE       | 0    |
    | BYTE2         | X     | 0     | BYTE3      | 0    |
    | BYTE2         | X     | 1     | IDLE       | 0    |
    | BYTE3         | 0     | 0     | IDLE       | 1    |
    | BYTE3         | 0     | 1     | IDLE       | 0    |
    | BYTE3         | 1     | 0     | BYTE1      | 1    |
    | BYTE3         | 1     | 1     | IDLE       | 0    |
In this table, 'X' denotes a don't care condition.";

fn stt_parsing() -> Check {
    let header = parse_header("module top_module(input clk, input [7:0] in, input reset, output done);").map_err(|e| e.to_string())?;
    let stt = parse_stt(BYTE_FSM_TABLE, Some(&header)).map_err(|e| e.to_string())?;
    let roles: Vec<ColumnRole> = stt.columns.iter().map(|c| c.role).collect();
    use ColumnRole::*;
    ensure(roles == [CurrentState, Input, Input, NextState, Output], || format!("roles {roles:?}"))?;
    ensure(stt.rows.len() == 12, || format!("{} rows", stt.rows.len()))?;
    let wildcards: Vec<usize> = stt.rows.iter().enumerate().filter(|(_, r)| r[1] == SttCell::Wildcard).map(|(i, _)| i).collect();
    ensure(wildcards == [4, 5, 6, 7], || format!("wildcards in rows {wildcards:?}"))?;
    ensure(stt.to_markdown().matches("| X ").count() == 4, || "wildcards lost on rendering".into())?;
    Ok("5 columns (current, in[3], reset, next, done), 12 rows, 4 X cells".into())
}

// 7. End-to-end determinism on the bundled fixture.

fn end_to_end_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str| {
        cmd_run(&RunArgs {
            dataset: fixtures().join("e2e/dataset"),
            config: fixtures().join("e2e/config.toml"),
            out: dir.path().join(name),
            tasks: None,
        })
        .map_err(|e| e.to_string())
    };
    let a = run("a")?;
    let b = run("b")?;
    let bytes_a = std::fs::read(&a.report_path).map_err(|e| e.to_string())?;
    let bytes_b = std::fs::read(&b.report_path).map_err(|e| e.to_string())?;
    ensure(bytes_a == bytes_b, || "reports differ".into())?;
    let report: RunReport = serde_json::from_slice(&bytes_a).map_err(|e| e.to_string())?;
    // and2 passes (error 0), toggle peaks at 12/20 (0.4), popcount3 at 4/20 (0.8)
    let rates: Vec<(&str, &str)> = report.tasks.iter().map(|t| (t.task_id.as_str(), t.best_error_rate.as_str())).collect();
    ensure(rates == [("and2", "0"), ("popcount3", "4/5"), ("toggle", "2/5")], || format!("rates {rates:?}"))?;
    let h = report.aggregate.histogram;
    ensure(h == [1, 0, 1, 0, 1], || format!("histogram {h:?}"))?;
    Ok(format!("byte-identical reports, histogram {h:?}"))
}

// 8. Live smoke run.

fn live_smoke() -> Option<Check> {
    let key = std::env::var("OPENAI_API_KEY").ok().filter(|k| !k.is_empty());
    let iverilog = hdlflow::sim::icarus::find_executable(Path::new("iverilog"));
    if key.is_none() || iverilog.is_none() {
        return None;
    }
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Some(Err(e.to_string())),
    };
    Some(
        cmd_run(&RunArgs {
            dataset: fixtures().join("live/dataset"),
            config: fixtures().join("live/config.toml"),
            out: dir.path().to_path_buf(),
            tasks: None,
        })
        .map(|s| format!("{} tasks, {} failures", s.report.tasks.len(), s.report.failures.len()))
        .map_err(|e| e.to_string()),
    )
}

fn guarded(f: fn() -> Check) -> Check {
    panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 7] = [
        (1, "pass@k closed form equals subset enumeration", passk_equivalence),
        (2, "minimizer soundness and primality", minimizer_soundness),
        (3, "emitted Verilog matches its table", emitted_verilog_correctness),
        (4, "search policy conformance", search_policy),
        (5, "three-always-block merge fallback", merge_fallback),
        (6, "state-transition table parsing", stt_parsing),
        (7, "end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        match guarded(f) {
            Ok(detail) => println!("PASS {id} {name}: {detail}"),
            Err(e) => {
                failed += 1;
                println!("FAIL {id} {name}: {e}");
            }
        }
    }
    match live_smoke() {
        None => println!("SKIP 8 live smoke: needs OPENAI_API_KEY and iverilog on PATH"),
        Some(Ok(detail)) => println!("PASS 8 live smoke: {detail}"),
        Some(Err(e)) => {
            failed += 1;
            println!("FAIL 8 live smoke: {e}");
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
