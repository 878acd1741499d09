//! Named reference systems.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flowbox::{realize_rotation, RealizeParams};
use crate::flow::IntegratorConfig;
use crate::perturb::{build_bumps, build_perturbed_hamiltonian, Universal};
use crate::symplectic::{Mat4, Vec4};
use crate::system::{HamiltonianSystem, Quadratic};

pub const IDS: [&str; 6] = [
    "translation",
    "hyperbolic-drift",
    "elliptic-drift",
    "quadratic(S)",
    "bump-rotation(alpha,r,nu)",
    "realized(base,x1,x2,x3,x4,alpha,r)",
];

fn drift(s22: f64, s44: f64) -> Result<Quadratic> {
    Quadratic::new(Mat4::from_diagonal(&Vec4::new(0.0, s22, 0.0, s44)), Vec4::new(0.0, 0.0, 1.0, 0.0))
}

/// Splits on commas that are not nested in parentheses.
fn split_args(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

fn numbers(args: &[&str]) -> Result<Vec<f64>> {
    args.iter()
        .map(|a| a.parse::<f64>().map_err(|_| Error::Config(format!("not a number: {a:?}"))))
        .collect()
}

/// Quadratic form from 4 (diagonal), 10 (upper triangle, row-wise) or 16 (row-major) entries.
pub fn quadratic_form(v: &[f64]) -> Result<Mat4> {
    match v.len() {
        4 => Ok(Mat4::from_diagonal(&Vec4::from_column_slice(v))),
        10 => {
            let mut m = Mat4::zeros();
            let mut k = 0;
            for i in 0..4 {
                for j in i..4 {
                    m[(i, j)] = v[k];
                    m[(j, i)] = v[k];
                    k += 1;
                }
            }
            Ok(m)
        }
        16 => Ok(Mat4::from_row_slice(v)),
        n => Err(Error::Config(format!("quadratic(S) needs 4, 10 or 16 entries, got {n}"))),
    }
}

pub fn system(id: &str) -> Result<HamiltonianSystem> {
    let id = id.trim();
    let model: Arc<dyn crate::system::Hamiltonian> = match id {
        "translation" => Arc::new(drift(0.0, 0.0)?),
        "hyperbolic-drift" => Arc::new(drift(1.0, -1.0)?),
        "elliptic-drift" => Arc::new(drift(1.0, 1.0)?),
        _ => {
            let open = id.find('(').ok_or_else(|| Error::Config(format!("unknown system {id:?}")))?;
            if !id.ends_with(')') {
                return Err(Error::Config(format!("malformed system id {id:?}")));
            }
            let (name, inner) = (&id[..open], &id[open + 1..id.len() - 1]);
            let args = split_args(inner);
            match name {
                "quadratic" => {
                    let s = quadratic_form(&numbers(&args)?)?;
                    return Ok(HamiltonianSystem::new(id, Arc::new(Quadratic::new(s, Vec4::zeros())?)));
                }
                "bump-rotation" => {
                    let v = numbers(&args)?;
                    let [alpha, r, nu] = v[..] else {
                        return Err(Error::Config("bump-rotation takes (alpha, r, nu)".into()));
                    };
                    let p = build_bumps(r, nu, Universal::default())?.with_alpha(alpha)?;
                    return Ok(build_perturbed_hamiltonian(&p));
                }
                "realized" => {
                    if args.len() != 7 {
                        return Err(Error::Config("realized takes (base, x1, x2, x3, x4, alpha, r)".into()));
                    }
                    let base = system(args[0])?;
                    let v = numbers(&args[1..])?;
                    let x = Vec4::new(v[0], v[1], v[2], v[3]);
                    let params = RealizeParams { alpha: v[4], r: v[5], shrink_max: 0, ..RealizeParams::default() };
                    let (sys, _) = realize_rotation(&base, &x, &params, &IntegratorConfig::default())?;
                    return Ok(sys);
                }
                _ => return Err(Error::Config(format!("unknown system {id:?}"))),
            }
        }
    };
    Ok(HamiltonianSystem::new(id, model))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_arguments() {
        assert_eq!(split_args("a(b,c), 1, 2"), vec!["a(b,c)", "1", "2"]);
    }

    #[test]
    fn unknown_ids_rejected() {
        assert!(system("nope").is_err());
        assert!(system("quadratic(1,2)").is_err());
        assert!(system("bump-rotation(0.1,0.1)").is_err());
    }

    #[test]
    fn quadratic_forms() {
        let d = quadratic_form(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d[(2, 2)], 3.0);
        let u = quadratic_form(&[1.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(u[(1, 0)], 2.0);
        assert_eq!(u, u.transpose());
    }
}
