//! Workload generators shared by the benches.

use fluxcompose::dsl::{parse_domain, parse_problem};
use fluxcompose::scenario::{load_roster, validate_travel_plan, Roster};
use fluxcompose::{PlanningProblem, Term};

/// A domain whose only plan is `len` chained steps, with `width` dead-end
/// actions branching off every link.
pub fn chain_problem(len: usize, width: usize) -> PlanningProblem {
    let mut d = String::new();
    for i in 0..=len {
        d.push_str(&format!("fluent F{i}/1.\n"));
    }
    for k in 0..width {
        d.push_str(&format!("fluent D{k}/1.\n"));
    }
    for i in 0..len {
        let j = i + 1;
        d.push_str(&format!(
            "action step{i}(X)\n    poss: knows_val(F{i}(X))\n    update: add [know(F{j}(Y))] remove [].\n"
        ));
        for k in 0..width {
            d.push_str(&format!(
                "action dead{i}x{k}(X)\n    poss: knows_val(F{i}(X))\n    update: add [know(D{k}(X))] remove [].\n"
            ));
        }
    }
    let p = format!("init: know(F0(seed)).\ngoal: know(F{len}(G)).\n");
    let domain = parse_domain(&d).expect("generated domain parses");
    let problem = parse_problem(&p).expect("generated problem parses");
    PlanningProblem::from_files(&domain, &problem).expect("generated problem is valid")
}

/// Nested term of the given depth, `f(f(...f(leaf)...))`.
pub fn nested(depth: usize, leaf: Term) -> Term {
    (0..depth).fold(leaf, |t, _| Term::compound("f", vec![t, Term::constant("k")]))
}

/// Roster of `n` passengers over 20 coaches; every fourth one is a validated
/// medical professional.
pub fn roster(n: usize) -> Roster {
    let coaches: Vec<String> = (1..=20).map(|i| format!("S{i}")).collect();
    let mut csv = format!("#coach-order: {}\n", coaches.join(","));
    csv.push_str(&fluxcompose::scenario::ROSTER_HEADER.join(","));
    csv.push('\n');
    let profs = ["doctor", "nurse", "paramedic"];
    let specs = ["orthopedics", "cardiology", ""];
    for i in 0..n {
        let coach = &coaches[i % coaches.len()];
        let line = if i % 4 == 0 {
            let prof = profs[i / 4 % 3];
            let spec = if prof == "doctor" { specs[i / 12 % 3] } else { "" };
            format!("Q{i},Resp {i},{coach},{},DeliveryPersonnel,{prof},{spec},yes,,,,A,B,2026-03-14\n", i % 72 + 1)
        } else {
            format!("Q{i},Pass {i},{coach},{},Patient,,,yes,,,,A,B,2026-03-14\n", i % 72 + 1)
        };
        csv.push_str(&line);
    }
    let mut r = load_roster(&csv).expect("generated roster loads");
    let date = chrono_date();
    for i in (0..n).step_by(4) {
        validate_travel_plan(&mut r, &format!("Q{i}"), "A", "B", date).expect("validates");
    }
    r
}

fn chrono_date() -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(2026, 3, 14).expect("valid date")
}
