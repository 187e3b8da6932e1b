//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use spcrit::acceptance::{self, CriterionOutcome};

const PAIR_MODEL: &str = r#"{"states":["A","B"],"m":[1,1],"Q":[[-1,1],[1,-1]],
"beta":[1,1],"a":[0,0],"b":[1,1],"jumps":[[],[]]}"#;

fn simulate(dir: &Path, name: &str, threads: Option<&str>) -> Result<Vec<u8>, String> {
    let out = dir.join(name);
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spcrit"));
    cmd.arg("simulate")
        .arg(dir.join("pair.json"))
        .args(["--mu", "1,0.5", "--t", "10", "--dt", "0.01", "--paths", "20000"])
        .args(["--seed", "42", "--f", "1,-1", "--out"])
        .arg(&out);
    if let Some(n) = threads {
        cmd.args(["--threads", n]);
    }
    let status = cmd.output().map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    std::fs::read(&out).map_err(|e| e.to_string())
}

fn determinism() -> CriterionOutcome {
    let start = Instant::now();
    let check = || -> Result<(bool, String), String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        std::fs::write(dir.path().join("pair.json"), PAIR_MODEL).map_err(|e| e.to_string())?;
        let a = simulate(dir.path(), "a.csv", None)?;
        let b = simulate(dir.path(), "b.csv", None)?;
        let one = simulate(dir.path(), "one.csv", Some("1"))?;
        let four = simulate(dir.path(), "four.csv", Some("4"))?;
        let same = a == b;
        let threads = a == one && a == four;
        Ok((
            same && threads && !a.is_empty(),
            format!(
                "{} bytes; repeat identical: {same}, --threads 1/4 identical: {threads}",
                a.len()
            ),
        ))
    };
    let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionOutcome {
        id: 9,
        name: "determinism",
        passed,
        detail,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(120),
    }
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture or a name filter are accepted and ignored.
    let mut outcomes = acceptance::run_all(false);
    outcomes.push(determinism());
    let mut failed = 0;
    for o in &outcomes {
        println!("{}", o.line());
        if !(o.passed && o.within_budget()) {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
