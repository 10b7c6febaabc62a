//! `lp-minilp <model.lp> <solution.sol>`: solve an fcbc LP file with minilp.

use std::process::ExitCode;

use fcbc::lp::{parse_lp, Relation};
use fcbc::solver::{write_solution, Status};
use minilp::{ComparisonOp, OptimizationDirection, Problem};

fn solve(text: &str) -> Result<(Status, Vec<f64>), String> {
    let model = parse_lp(text).map_err(|e| e.to_string())?;
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let mut cost = vec![0.0; model.num_vars()];
    for &(k, v) in &model.objective {
        cost[k] += v;
    }
    let vars: Vec<_> = model
        .vars
        .iter()
        .zip(&cost)
        .map(|(v, c)| problem.add_var(*c, (v.lower.unwrap_or(f64::NEG_INFINITY), v.upper.unwrap_or(f64::INFINITY))))
        .collect();
    for r in model.rows() {
        let terms: Vec<_> = r.cols.iter().zip(r.vals).map(|(c, v)| (vars[*c as usize], *v)).collect();
        let op = match r.rel {
            Relation::Le => ComparisonOp::Le,
            Relation::Ge => ComparisonOp::Ge,
        };
        problem.add_constraint(&terms[..], op, r.rhs);
    }
    match problem.solve() {
        Ok(sol) => Ok((Status::Optimal, vars.iter().map(|v| sol[*v]).collect())),
        Err(minilp::Error::Infeasible) => Ok((Status::Infeasible, Vec::new())),
        Err(minilp::Error::Unbounded) => Ok((Status::Unbounded, Vec::new())),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 3 {
        eprintln!("usage: lp-minilp <model.lp> <solution.sol>");
        return ExitCode::from(2);
    }
    let text = match std::fs::read_to_string(&args[1]) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", args[1]);
            return ExitCode::from(2);
        }
    };
    let (status, values) = match solve(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let names: Vec<String> = match parse_lp(&text) {
        Ok(m) => m.vars.into_iter().map(|v| v.name).collect(),
        Err(_) => Vec::new(),
    };
    if let Err(e) = std::fs::write(&args[2], write_solution(status, &names, &values)) {
        eprintln!("{}: {e}", args[2]);
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
