use std::io::{self, Write};

use tscale::sptheory::sort_for_display;
use tscale::ComplexScalar;

/// `x` rounded to 6 significant digits, printed in its shortest form.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    format!("{rounded}")
}

/// Eigenvalues as `a±bj` pairs (or plain reals), ordered by |Re| then |Im|.
pub fn eigen_strings(values: &[ComplexScalar]) -> Vec<String> {
    let mut sorted = values.to_vec();
    sort_for_display(&mut sorted);
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        if v.im == 0.0 {
            out.push(sig6(v.re));
            i += 1;
            continue;
        }
        let paired = sorted.get(i + 1).is_some_and(|w| *w == v.conj());
        if paired {
            out.push(format!("{}±{}j", sig6(v.re), sig6(v.im.abs())));
            i += 2;
        } else {
            let sign = if v.im < 0.0 { '-' } else { '+' };
            out.push(format!("{}{sign}{}j", sig6(v.re), sig6(v.im.abs())));
            i += 1;
        }
    }
    out
}

pub fn eigen_list(values: &[ComplexScalar]) -> String {
    eigen_strings(values).join(", ")
}

pub fn eigen_section(out: &mut impl Write, title: &str, values: &[ComplexScalar]) -> io::Result<()> {
    writeln!(out, "{title}:")?;
    for s in eigen_strings(values) {
        writeln!(out, "  {s}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(670.8203932), "670.82");
        assert_eq!(sig6(-2432.5512), "-2432.55");
        assert_eq!(sig6(1.0 / 700.0), "0.00142857");
        assert_eq!(sig6(-500.0), "-500");
        assert_eq!(sig6(-0.0), "0");
    }

    #[test]
    fn conjugate_pairs_collapse() {
        let v = [
            ComplexScalar::new(-500.0, -670.8203932),
            ComplexScalar::new(-3.0, 0.0),
            ComplexScalar::new(-500.0, 670.8203932),
        ];
        assert_eq!(eigen_list(&v), "-3, -500±670.82j");
    }
}
