//! Human-readable pipeline listing: shape, per-slot programs, mux wiring,
//! and (when bound) the applied hole values.

use std::fmt::Write as _;

use super::Pipeline;

pub(super) fn describe(pipeline: &Pipeline) -> String {
    let status = if pipeline.is_optimized() {
        "optimized"
    } else if pipeline.is_bound() {
        "bound"
    } else {
        "unbound"
    };
    let mut out = format!(
        "pipeline depth={} width={} phv_length={} {}\n",
        pipeline.depth(),
        pipeline.width(),
        pipeline.phv_length(),
        status
    );
    for (s, stage) in pipeline.stages().iter().enumerate() {
        let _ = writeln!(out, "stage {}:", s);
        for (a, alu) in stage.alus.iter().enumerate() {
            let _ = writeln!(out, "  alu {}:", a);
            for line in alu.program.pretty().lines() {
                let _ = writeln!(out, "    {}", line);
            }
            for (k, operand) in alu.program.packet_operands.iter().enumerate() {
                if pipeline.is_bound() {
                    let _ = writeln!(
                        out,
                        "    input mux {} ({}) <- container {}",
                        k, operand, alu.input_ctrls[k]
                    );
                } else {
                    let _ = writeln!(out, "    input mux {} ({}) <- unbound", k, operand);
                }
            }
            if pipeline.is_bound() && !pipeline.is_optimized() && !alu.bindings.is_empty() {
                let names = alu.program.local_slot_names();
                let pairs: Vec<String> = names
                    .iter()
                    .zip(&alu.bindings)
                    .map(|(name, value)| format!("{}={}", name, value))
                    .collect();
                let _ = writeln!(out, "    bindings: {}", pairs.join(" "));
            }
        }
        for c in 0..pipeline.phv_length() {
            if pipeline.is_bound() {
                let _ = writeln!(out, "  output mux {} <- alu {}", c, stage.output_ctrls[c]);
            } else {
                let _ = writeln!(out, "  output mux {} <- unbound", c);
            }
        }
    }
    out
}
