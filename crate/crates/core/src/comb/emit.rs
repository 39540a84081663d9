// SPDX-License-Identifier: Apache-2.0

//! Verilog text from minimized expressions, and exhaustive testbenches for
//! truth tables.

use std::collections::BTreeSet;
use std::fmt::Write;

use thiserror::Error;

use super::minimize::SopExpression;
use super::table::{normalize_name, TruthTable};
use crate::verilog::{header_text, parse_header, ModuleHeader, Port};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmitError {
    #[error("module header: {0}")]
    Header(String),
    #[error("signals not matched against the module ports: {}", .unmatched.join(", "))]
    PortMismatch { unmatched: Vec<String> },
    #[error("port {0} has a non-literal range")]
    UnsupportedPort(String),
    #[error("testbench needs {0} input bits; at most {MAX_TESTBENCH_INPUTS} are enumerated")]
    TooManyInputs(usize),
}

/// Largest input count for which every pattern is written into a testbench.
pub const MAX_TESTBENCH_INPUTS: usize = 16;

fn parsed_header(header: &str) -> Result<ModuleHeader, EmitError> {
    parse_header(header).map_err(|e| EmitError::Header(e.to_string()))
}

/// A module implementing each expression with a continuous assignment.
///
/// Output names must cover the header's output bits exactly and every
/// literal must name an input bit. Outputs declared `reg` become nets.
pub fn emit_verilog(header: &str, exprs: &[SopExpression]) -> Result<String, EmitError> {
    let parsed = parsed_header(header)?;
    let output_bits = parsed.output_bits();
    let input_bits: BTreeSet<String> = parsed.input_bits().into_iter().collect();
    let expr_names: Vec<String> = exprs.iter().map(|e| normalize_name(&e.output)).collect();
    let mut unmatched: Vec<String> = Vec::new();
    unmatched.extend(expr_names.iter().filter(|n| !output_bits.contains(n)).cloned());
    unmatched.extend(output_bits.iter().filter(|b| !expr_names.contains(b)).cloned());
    for e in exprs {
        for lit in e.terms.iter().flatten() {
            let n = normalize_name(&lit.input);
            if !input_bits.contains(&n) && !unmatched.contains(&n) {
                unmatched.push(n);
            }
        }
    }
    if !unmatched.is_empty() {
        return Err(EmitError::PortMismatch { unmatched });
    }
    let mut out = if parsed.outputs().any(|p| p.is_reg) {
        let mut h = parsed.clone();
        for p in h.ports.iter_mut() {
            p.is_reg = false;
        }
        h.render()
    } else {
        header_text(header)
    };
    out.push('\n');
    for bit in &output_bits {
        let e = &exprs[expr_names.iter().position(|n| n == bit).expect("checked above")];
        let _ = writeln!(out, "\tassign {bit} = {};", e.to_verilog());
    }
    out.push_str("endmodule\n");
    Ok(out)
}

/// Marker comment carrying column order, read back by the table oracle.
pub const VECTOR_MARKER: &str = "// hdlflow-vectors";

fn port_expr(port: &Port, bit_source: impl Fn(&str) -> String) -> String {
    let bits = port.bit_names();
    if bits.len() == 1 {
        bit_source(&bits[0])
    } else {
        let parts: Vec<String> = bits.iter().map(|b| bit_source(b)).collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// A self-checking testbench applying every input pattern of `table` and
/// comparing care outputs. Rows the table omits are not checked.
///
/// The pass-count line matches the default simulator protocol.
pub fn exhaustive_testbench(header: &str, table: &TruthTable) -> Result<String, EmitError> {
    let parsed = parsed_header(header)?;
    for p in &parsed.ports {
        if p.width().is_none() {
            return Err(EmitError::UnsupportedPort(p.name.clone()));
        }
    }
    let inputs = table.inputs();
    let outputs = table.outputs();
    let n = inputs.len();
    if n > MAX_TESTBENCH_INPUTS {
        return Err(EmitError::TooManyInputs(n));
    }
    let in_bits = parsed.input_bits();
    let out_bits = parsed.output_bits();
    let unmatched: Vec<String> = inputs
        .iter()
        .filter(|i| !in_bits.contains(i))
        .chain(outputs.iter().filter(|o| !out_bits.contains(o)))
        .cloned()
        .collect();
    if !unmatched.is_empty() {
        return Err(EmitError::PortMismatch { unmatched });
    }
    let m = outputs.len().max(1);
    // input i drives stim[n-1-i]; output j lands in resp[m-1-j]
    let stim_of = |name: &str| match inputs.iter().position(|i| i == name) {
        Some(i) => format!("stim[{}]", n - 1 - i),
        None => "1'b0".to_string(),
    };

    let mut tb = String::new();
    let _ = writeln!(tb, "`timescale 1ns/1ps");
    let _ = writeln!(tb, "{VECTOR_MARKER} inputs={} outputs={}", inputs.join(","), outputs.join(","));
    let _ = writeln!(tb, "module tb;");
    let _ = writeln!(tb, "\treg [{}:0] stim;", n - 1);
    let _ = writeln!(tb, "\twire [{}:0] resp;", m - 1);
    let _ = writeln!(tb, "\tinteger mismatches;");
    let _ = writeln!(tb, "\tinteger samples;");
    let mut conns = Vec::new();
    for p in &parsed.ports {
        match p.direction {
            crate::verilog::Direction::Output => {
                let w = p.width().unwrap_or(1);
                let net = format!("o_{}", p.name);
                if w == 1 {
                    let _ = writeln!(tb, "\twire {net};");
                } else {
                    let _ = writeln!(tb, "\twire [{}:0] {net};", w - 1);
                }
                for (k, bit) in p.bit_names().iter().enumerate() {
                    if let Some(j) = outputs.iter().position(|o| o == bit) {
                        let src = if w == 1 { net.clone() } else { format!("{net}[{}]", w as usize - 1 - k) };
                        let _ = writeln!(tb, "\tassign resp[{}] = {src};", m - 1 - j);
                    }
                }
                conns.push(format!("\t\t.{}({net})", p.name));
            }
            _ => conns.push(format!("\t\t.{}({})", p.name, port_expr(p, stim_of))),
        }
    }
    if outputs.is_empty() {
        let _ = writeln!(tb, "\tassign resp = 1'b0;");
    }
    let _ = writeln!(tb, "\t{} dut (\n{}\n\t);", parsed.name, conns.join(",\n"));
    let _ = writeln!(tb, "\ttask check(input [{}:0] v, input [{}:0] expected, input [{}:0] care);", n - 1, m - 1, m - 1);
    let _ = writeln!(tb, "\tbegin");
    let _ = writeln!(tb, "\t\tstim = v;");
    let _ = writeln!(tb, "\t\t#1;");
    let _ = writeln!(tb, "\t\tsamples = samples + 1;");
    let _ = writeln!(tb, "\t\tif (((resp ^ expected) & care) !== {{{m}{{1'b0}}}}) mismatches = mismatches + 1;");
    let _ = writeln!(tb, "\tend");
    let _ = writeln!(tb, "\tendtask");
    let _ = writeln!(tb, "\tinitial begin");
    let _ = writeln!(tb, "\t\tmismatches = 0;");
    let _ = writeln!(tb, "\t\tsamples = 0;");
    for r in 0..table.rows().len() {
        let p = table.pattern(r);
        let v: String = (0..n).map(|i| if p >> i & 1 == 1 { '1' } else { '0' }).collect();
        let mut expected = String::new();
        let mut care = String::new();
        for j in 0..outputs.len() {
            match table.output_cell(r, j).as_bool() {
                Some(b) => {
                    expected.push(if b { '1' } else { '0' });
                    care.push('1');
                }
                None => {
                    expected.push('0');
                    care.push('0');
                }
            }
        }
        if outputs.is_empty() {
            expected.push('0');
            care.push('0');
        }
        let _ = writeln!(tb, "\t\tcheck({n}'b{v}, {m}'b{expected}, {m}'b{care});");
    }
    let _ = writeln!(
        tb,
        "\t\t$display(\"Hint: Total mismatched samples is %0d out of %0d samples\", mismatches, samples);"
    );
    let _ = writeln!(tb, "\t\t$finish;");
    let _ = writeln!(tb, "\tend");
    let _ = writeln!(tb, "endmodule");
    Ok(tb)
}

fn split_bit(name: &str) -> (&str, Option<i64>) {
    if let Some(open) = name.find('[') {
        if let Some(idx) = name[open + 1..].strip_suffix(']').and_then(|d| d.parse().ok()) {
            return (&name[..open], Some(idx));
        }
    }
    (name, None)
}

/// A `top_module` header declaring the table's columns, with `base[i]`
/// names grouped into one vector port per base.
pub fn header_for_table(table: &TruthTable) -> String {
    let mut ports: Vec<String> = Vec::new();
    for (dir, names) in [("input", table.header_inputs()), ("output", table.header_outputs())] {
        let mut groups: Vec<(&str, Vec<i64>)> = Vec::new();
        for name in names {
            let (base, idx) = split_bit(name);
            match groups.iter_mut().find(|(b, _)| *b == base) {
                Some((_, v)) => v.extend(idx),
                None => groups.push((base, idx.into_iter().collect())),
            }
        }
        for (base, idx) in groups {
            match (idx.iter().max(), idx.iter().min()) {
                (Some(hi), Some(lo)) => ports.push(format!("{dir} [{hi}:{lo}] {base}")),
                _ => ports.push(format!("{dir} {base}")),
            }
        }
    }
    format!("module top_module({});", ports.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comb::minimize::{minimize_all, Literal};
    use crate::comb::table::parse_truth_table;

    fn and_or() -> SopExpression {
        SopExpression {
            output: "out".into(),
            terms: vec![
                vec![Literal::new("a", true), Literal::new("b", false)],
                vec![Literal::new("c", true)],
            ],
            constant: None,
        }
    }

    #[test]
    fn emits_assign_for_each_output() {
        let v = emit_verilog("module top_module(input a, input b, input c, output out);", &[and_or()]).unwrap();
        assert_eq!(
            v,
            "module top_module(input a, input b, input c, output out);\n\tassign out = (a & ~b) | (c);\nendmodule\n"
        );
    }

    #[test]
    fn reg_outputs_become_nets() {
        let v = emit_verilog("module top_module(input a, input b, input c, output reg out);", &[and_or()]).unwrap();
        assert!(v.contains("\toutput out"));
        assert!(!v.contains("reg"));
    }

    #[test]
    fn constants_are_sized_literals() {
        let v = emit_verilog(
            "module top_module(output one, output zero);",
            &[SopExpression::constant("one", true), SopExpression::constant("zero", false)],
        )
        .unwrap();
        assert!(v.contains("assign one = 1'b1;"));
        assert!(v.contains("assign zero = 1'b0;"));
    }

    #[test]
    fn unknown_signals_are_reported() {
        let err = emit_verilog("module top_module(input a, input c, output y);", &[and_or()]).unwrap_err();
        assert_eq!(
            err,
            EmitError::PortMismatch {
                unmatched: vec!["out".into(), "y".into(), "b".into()]
            }
        );
    }

    #[test]
    fn vector_ports_use_bit_selects() {
        let t = parse_truth_table(crate::comb::table::tests_support::EXEMPLAR).unwrap();
        let exprs = minimize_all(&t).unwrap();
        let v = emit_verilog("module top_module(input [2:1] a, output x);", &exprs).unwrap();
        assert!(v.contains("assign x = (a[1]) | (a[2]);"));
    }

    #[test]
    fn testbench_lists_every_row() {
        let t = parse_truth_table(
            r#"{"table": [[0,0,0],[0,1,"x"],[1,0,1],[1,1,1]], "inputs": ["a","b"], "outputs": ["y"]}"#,
        )
        .unwrap();
        let tb = exhaustive_testbench("module top_module(input a, input b, output y);", &t).unwrap();
        assert!(tb.contains("// hdlflow-vectors inputs=a,b outputs=y"));
        assert!(tb.contains("check(2'b00, 1'b0, 1'b1);"));
        assert!(tb.contains("check(2'b01, 1'b0, 1'b0);"));
        assert!(tb.contains("check(2'b10, 1'b1, 1'b1);"));
        assert!(tb.contains(".a(stim[1])"));
        assert!(tb.contains(".b(stim[0])"));
        assert!(tb.contains("Hint: Total mismatched samples is"));
    }

    #[test]
    fn testbench_rejects_unknown_columns() {
        let t = parse_truth_table(r#"{"table": [[0,0]], "inputs": ["q"], "outputs": ["y"]}"#).unwrap();
        assert!(matches!(
            exhaustive_testbench("module top_module(input a, output y);", &t),
            Err(EmitError::PortMismatch { .. })
        ));
    }

    #[test]
    fn header_groups_vector_bits() {
        let t = parse_truth_table(crate::comb::table::tests_support::EXEMPLAR).unwrap();
        assert_eq!(header_for_table(&t), "module top_module(input [2:1] a, output x);");
        let t = parse_truth_table(r#"{"table": [[0,1,0]], "inputs": ["s","d[0]"], "outputs": ["y"]}"#).unwrap();
        assert_eq!(header_for_table(&t), "module top_module(input s, input [0:0] d, output y);");
    }
}
