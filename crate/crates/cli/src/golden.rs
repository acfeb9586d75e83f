//! Decision logs as CSV, and the golden logs of the two worked examples.
//!
//! A golden file starts with `# sha256: <hex>` over the rest of the file,
//! so a damaged file is told apart from a regression in the mechanisms.

use std::fmt::Write as _;
use std::path::Path;

use frugal_core::reference::{example_one, example_two, ReferenceInstance};
use frugal_core::{Event, HeteroOmg, HeteroOmz, Mechanism, Outcome};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const LOG_HEADER: &str = "t,kind,user,tasks,price,allocated_before,threshold,stage_tasks";
const FIELDS: [&str; 8] = [
    "t",
    "kind",
    "user",
    "tasks",
    "price",
    "allocated_before",
    "threshold",
    "stage_tasks",
];

/// One CSV row per logged event, in log order. `threshold` and
/// `stage_tasks` are the values in force during the step.
pub fn render_decision_log(outcome: &Outcome) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for rec in &outcome.log {
        for e in &rec.events {
            let (kind, user, tasks, price, before) = match *e {
                Event::Arrive { user } => ("arrive", Some(user), None, None, None),
                Event::Accept {
                    user,
                    tasks,
                    price,
                    allocated_before,
                } => (
                    "accept",
                    Some(user),
                    Some(tasks),
                    Some(price),
                    Some(allocated_before),
                ),
                Event::Reject {
                    user,
                    allocated_before,
                } => ("reject", Some(user), None, None, Some(allocated_before)),
                Event::Upgrade {
                    user,
                    tasks,
                    price,
                    allocated_before,
                } => (
                    "upgrade",
                    Some(user),
                    Some(tasks),
                    Some(price),
                    Some(allocated_before),
                ),
                Event::Depart { user } => ("depart", Some(user), None, None, None),
                Event::Threshold { price } => ("threshold", None, None, Some(price), None),
            };
            let opt = |x: Option<String>| x.unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{kind},{},{},{},{},{},{}",
                rec.t,
                opt(user.map(|u| u.to_string())),
                opt(tasks.map(|u| u.to_string())),
                opt(price.map(|p| p.to_string())),
                opt(before.map(|u| u.to_string())),
                rec.threshold,
                rec.stage_tasks,
            );
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    One,
    Two,
}

impl Example {
    pub const ALL: [Example; 2] = [Example::One, Example::Two];

    pub fn file_name(&self) -> &'static str {
        match self {
            Example::One => "example-1.csv",
            Example::Two => "example-2.csv",
        }
    }

    pub fn instance(&self) -> ReferenceInstance<f64> {
        match self {
            Example::One => example_one(),
            Example::Two => example_two(),
        }
    }

    /// Example 1 runs the zero-interval mechanism, Example 2 the general one.
    pub fn run(&self) -> Outcome {
        let ex = self.instance();
        let stream = ex.truthful_stream();
        let result = match self {
            Example::One => HeteroOmz::new(ex.params, ex.delta).run(&stream),
            Example::Two => HeteroOmg::new(ex.params, ex.delta).run(&stream),
        };
        result.expect("worked examples are valid instances")
    }

    fn embedded(&self) -> &'static str {
        match self {
            Example::One => include_str!("../golden/example-1.csv"),
            Example::Two => include_str!("../golden/example-2.csv"),
        }
    }
}

pub fn sha256_hex(data: &str) -> String {
    Sha256::digest(data.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A golden file: integrity header followed by the log.
pub fn seal(log: &str) -> String {
    format!("# sha256: {}\n{log}", sha256_hex(log))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GoldenError {
    #[error("{file}: missing `# sha256:` header")]
    MissingHeader { file: String },
    #[error("{file}: checksum mismatch (file is damaged)")]
    Checksum { file: String },
    #[error("{file}: cannot read golden file: {reason}")]
    Io { file: String, reason: String },
}

/// Checks the header and returns the log body.
pub fn unseal<'a>(file: &str, text: &'a str) -> Result<&'a str, GoldenError> {
    let (first, body) = text.split_once('\n').unwrap_or((text, ""));
    let want = first
        .strip_prefix("# sha256: ")
        .ok_or_else(|| GoldenError::MissingHeader { file: file.into() })?;
    if want.trim() != sha256_hex(body) {
        return Err(GoldenError::Checksum { file: file.into() });
    }
    Ok(body)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub file: String,
    /// Time step of the first differing row, if it has one.
    pub t: Option<String>,
    pub field: String,
    pub expected: String,
    pub actual: String,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: first divergence at t={}, field `{}`: expected `{}`, got `{}`",
            self.file,
            self.t.as_deref().unwrap_or("?"),
            self.field,
            self.expected,
            self.actual
        )
    }
}

/// First differing `(t, field)` between two rendered logs.
pub fn first_divergence(file: &str, expected: &str, actual: &str) -> Option<Divergence> {
    let mut exp = expected.lines();
    let mut act = actual.lines();
    loop {
        match (exp.next(), act.next()) {
            (None, None) => return None,
            (e, a) if e == a => continue,
            (e, a) => {
                let ecols: Vec<&str> = e.map(|l| l.split(',').collect()).unwrap_or_default();
                let acols: Vec<&str> = a.map(|l| l.split(',').collect()).unwrap_or_default();
                let n = ecols.len().max(acols.len());
                let i = (0..n).find(|&i| ecols.get(i) != acols.get(i)).unwrap_or(0);
                return Some(Divergence {
                    file: file.into(),
                    t: ecols.first().or(acols.first()).map(|s| s.to_string()),
                    field: FIELDS.get(i).copied().unwrap_or("row").to_string(),
                    expected: e.map_or("<end of log>".into(), |_| {
                        ecols.get(i).unwrap_or(&"").to_string()
                    }),
                    actual: a.map_or("<end of log>".into(), |_| {
                        acols.get(i).unwrap_or(&"").to_string()
                    }),
                });
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub checked: Vec<&'static str>,
    pub divergences: Vec<Divergence>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.divergences.is_empty()
    }
}

/// Replays both examples and diffs their logs against the golden files,
/// from `dir` when given, else the copies built into the binary.
pub fn verify_examples(dir: Option<&Path>) -> Result<VerifyReport, GoldenError> {
    let mut report = VerifyReport {
        checked: Vec::new(),
        divergences: Vec::new(),
    };
    for ex in Example::ALL {
        let name = ex.file_name();
        let text = match dir {
            Some(d) => std::fs::read_to_string(d.join(name)).map_err(|e| GoldenError::Io {
                file: name.into(),
                reason: e.to_string(),
            })?,
            None => ex.embedded().to_string(),
        };
        let golden = unseal(name, &text)?;
        let actual = render_decision_log(&ex.run());
        if let Some(d) = first_divergence(name, golden, &actual) {
            report.divergences.push(d);
        }
        report.checked.push(name);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_goldens_match() {
        let r = verify_examples(None).unwrap();
        assert!(r.passed(), "{:?}", r.divergences);
        assert_eq!(r.checked, vec!["example-1.csv", "example-2.csv"]);
    }

    #[test]
    fn seal_round_trip_and_damage() {
        let sealed = seal("a,b\n1,2\n");
        assert_eq!(unseal("x", &sealed).unwrap(), "a,b\n1,2\n");
        let damaged = sealed.replace("1,2", "1,3");
        assert!(matches!(
            unseal("x", &damaged),
            Err(GoldenError::Checksum { .. })
        ));
        assert!(matches!(
            unseal("x", "a,b\n"),
            Err(GoldenError::MissingHeader { .. })
        ));
    }

    #[test]
    fn divergence_names_step_and_field() {
        let golden = format!("{LOG_HEADER}\n1,accept,1,1,5,0,5,1/8\n2,arrive,2,,,,2,1/4\n");
        let changed = golden.replace("1,accept,1,1,5,0", "1,accept,1,1,4,0");
        let d = first_divergence("f", &golden, &changed).unwrap();
        assert_eq!((d.t.as_deref(), d.field.as_str()), (Some("1"), "price"));
        assert_eq!((d.expected.as_str(), d.actual.as_str()), ("5", "4"));
        let short = golden.lines().take(2).collect::<Vec<_>>().join("\n") + "\n";
        let d = first_divergence("f", &golden, &short).unwrap();
        assert_eq!(d.actual, "<end of log>");
        assert_eq!(d.t.as_deref(), Some("2"));
        assert!(first_divergence("f", &golden, &golden).is_none());
    }

    #[test]
    fn example_logs_carry_the_worked_numbers() {
        let one = render_decision_log(&Example::One.run());
        let thresholds: Vec<&str> = one
            .lines()
            .filter(|l| l.split(',').nth(1) == Some("threshold"))
            .map(|l| l.split(',').nth(4).unwrap())
            .collect();
        assert_eq!(&thresholds[..3], ["2", "2", "4"]);
        let two = render_decision_log(&Example::Two.run());
        let thresholds: Vec<&str> = two
            .lines()
            .filter(|l| l.split(',').nth(1) == Some("threshold"))
            .map(|l| l.split(',').nth(4).unwrap())
            .collect();
        assert_eq!(&thresholds[..3], ["5", "4", "5"]);
        assert!(two.contains(",upgrade,1,4,5,"));
    }
}
