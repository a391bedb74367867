use std::io::{self, Write};

use super::Trajectory;

/// Writes `t,<states>,<injections>,residual_norm,slow_deriv_norm` rows with
/// 17 significant digits and `\n` line endings.
pub fn write_csv<W: Write>(traj: &Trajectory, out: &mut W) -> io::Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(traj.state_names.iter().cloned());
    header.extend(traj.injection_names.iter().cloned());
    header.push("residual_norm".to_string());
    header.push("slow_deriv_norm".to_string());
    writeln!(out, "{}", header.join(","))?;

    let mut line = String::new();
    for i in 0..traj.len() {
        line.clear();
        push_num(&mut line, traj.times[i]);
        for v in traj.states[i].iter().chain(&traj.injections[i]) {
            line.push(',');
            push_num(&mut line, *v);
        }
        line.push(',');
        push_num(&mut line, traj.residual_norms[i]);
        line.push(',');
        push_num(&mut line, traj.slow_deriv_norms[i]);
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

fn push_num(line: &mut String, v: f64) {
    use std::fmt::Write as _;
    // Normalise negative zero so identical runs diff cleanly.
    let v = if v == 0.0 { 0.0 } else { v };
    let _ = write!(line, "{v:.16e}");
}
