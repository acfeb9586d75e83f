//! Flat `key = value` configuration.
//!
//! Keys carry a section prefix (`instance.`, `mechanism.`, `sweep.`,
//! `output.`); a few common ones also have bare aliases (`T`, `L`, `lambda`,
//! `delta`, `beta`, `mechanism`, `seeds`). `#` starts a comment. A later
//! line overrides an earlier one, which is how command-line flags are
//! applied on top of a file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use frugal_core::generators::{CostDist, CountDist, InstanceConfig, OrderModel};
use frugal_core::harness::experiment::ExperimentSettings;
use frugal_core::MechanismKind;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    /// 1-based line of the offending entry, when there is one.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Command {
    #[default]
    Run,
    VerifyExamples,
    Sweep,
    Deviations,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::VerifyExamples => "verify-examples",
            Command::Sweep => "sweep",
            Command::Deviations => "deviations",
        }
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [
            Command::Run,
            Command::VerifyExamples,
            Command::Sweep,
            Command::Deviations,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (csv or json)")),
        }
    }
}

/// CSV layout: one row per run, or one row per run and metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    #[default]
    Wide,
    Long,
}

impl FromStr for Layout {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wide" => Ok(Layout::Wide),
            "long" => Ok(Layout::Long),
            _ => Err(format!("unknown layout `{s}` (wide or long)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub tasks: Vec<u64>,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub format: Format,
    pub layout: Layout,
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    /// Base instance; `tasks` and `lambda` are the first sweep values.
    pub instance: InstanceConfig,
    /// Replay this file instead of generating users.
    pub instance_file: Option<PathBuf>,
    pub mechanisms: Vec<MechanismKind>,
    pub delta: f64,
    pub settings: ExperimentSettings,
    pub sweep: SweepSpec,
    pub output: OutputSpec,
}

const KEYS: &[(&str, &[&str])] = &[
    ("command", &[]),
    ("instance.T", &["T"]),
    ("instance.L", &["L"]),
    ("instance.lambda", &["lambda"]),
    ("instance.cost", &[]),
    ("instance.capacity", &[]),
    ("instance.interval", &[]),
    ("instance.order", &[]),
    ("instance.omega", &[]),
    ("instance.file", &[]),
    ("mechanism.names", &["mechanism", "mechanisms"]),
    ("mechanism.delta", &["delta"]),
    ("mechanism.beta", &["beta"]),
    ("mechanism.random_trials", &[]),
    ("mechanism.random_range", &[]),
    ("sweep.L", &[]),
    ("sweep.lambda", &[]),
    ("sweep.seeds", &["seeds"]),
    ("sweep.seed_list", &[]),
    ("output.dir", &[]),
    ("output.format", &[]),
    ("output.layout", &[]),
];

fn canonical(key: &str) -> Option<&'static str> {
    KEYS.iter()
        .find(|(k, aliases)| *k == key || aliases.contains(&key))
        .map(|(k, _)| *k)
}

/// `(line, canonical key, value)`.
type Entry = (Option<usize>, &'static str, String);

/// Splits lines into entries, last entry per key winning. Lines without a
/// number come from overrides.
fn entries(lines: &[(Option<usize>, &str)]) -> Result<Vec<Entry>, ConfigError> {
    let mut out: Vec<Entry> = Vec::new();
    for &(line, raw) in lines {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
        let key = k.trim();
        let key = canonical(key).ok_or_else(|| err(line, format!("unknown key `{key}`")))?;
        let value = v.trim().to_string();
        if value.is_empty() {
            return Err(err(line, format!("`{key}` has no value")));
        }
        out.retain(|(_, k, _)| *k != key);
        out.push((line, key, value));
    }
    Ok(out)
}

fn parse_num<T: FromStr>(line: Option<usize>, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| err(line, format!("`{key}`: cannot parse `{v}`")))
}

fn parse_pair<T: FromStr>(line: Option<usize>, key: &str, v: &str) -> Result<(T, T), ConfigError> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    match parts.as_slice() {
        [a, b] => Ok((parse_num(line, key, a)?, parse_num(line, key, b)?)),
        _ => Err(err(
            line,
            format!("`{key}`: expected two numbers, got `{v}`"),
        )),
    }
}

/// `constant X` or `uniform LOW HIGH`.
fn parse_cost(line: Option<usize>, v: &str) -> Result<CostDist, ConfigError> {
    let key = "instance.cost";
    let (kind, rest) = v.split_once(char::is_whitespace).unwrap_or((v, ""));
    let dist = match kind {
        "constant" => CostDist::Constant(parse_num(line, key, rest.trim())?),
        "uniform" => {
            let (low, high) = parse_pair(line, key, rest)?;
            CostDist::Uniform { low, high }
        }
        _ => {
            return Err(err(
                line,
                format!("`{key}`: expected `constant X` or `uniform LOW HIGH`"),
            ))
        }
    };
    dist.validate()
        .map_err(|e| err(line, format!("`{key}`: {e}")))?;
    Ok(dist)
}

fn parse_count(
    line: Option<usize>,
    key: &str,
    v: &str,
    min: u64,
) -> Result<CountDist, ConfigError> {
    let (kind, rest) = v.split_once(char::is_whitespace).unwrap_or((v, ""));
    let dist = match kind {
        "constant" => CountDist::Constant(parse_num(line, key, rest.trim())?),
        "uniform" => {
            let (low, high) = parse_pair(line, key, rest)?;
            CountDist::Uniform { low, high }
        }
        _ => {
            return Err(err(
                line,
                format!("`{key}`: expected `constant N` or `uniform LOW HIGH`"),
            ))
        }
    };
    dist.validate(min)
        .map_err(|e| err(line, format!("`{key}`: {e}")))?;
    Ok(dist)
}

/// `a, b, c` or `LOW..HIGH step S` (inclusive).
fn parse_u64_list(line: Option<usize>, key: &str, v: &str) -> Result<Vec<u64>, ConfigError> {
    if let Some((range, step)) = v.split_once("step") {
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| err(line, format!("`{key}`: expected `LOW..HIGH step S`")))?;
        let (lo, hi, step): (u64, u64, u64) = (
            parse_num(line, key, lo.trim())?,
            parse_num(line, key, hi.trim())?,
            parse_num(line, key, step.trim())?,
        );
        if step == 0 || lo > hi {
            return Err(err(line, format!("`{key}`: empty range")));
        }
        return Ok((lo..=hi).step_by(step as usize).collect());
    }
    v.split(',')
        .map(|p| parse_num(line, key, p.trim()))
        .collect()
}

fn parse_f64_list(line: Option<usize>, key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    if let Some((range, step)) = v.split_once("step") {
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| err(line, format!("`{key}`: expected `LOW..HIGH step S`")))?;
        let (lo, hi, step): (f64, f64, f64) = (
            parse_num(line, key, lo.trim())?,
            parse_num(line, key, hi.trim())?,
            parse_num(line, key, step.trim())?,
        );
        if step.is_nan() || step <= 0.0 || lo > hi {
            return Err(err(line, format!("`{key}`: empty range")));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as u64;
        // rounded so that 0.2 + 2 * 0.2 reads back as 0.6
        return Ok((0..=n)
            .map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9)
            .collect());
    }
    v.split(',')
        .map(|p| parse_num(line, key, p.trim()))
        .collect()
}

fn positive(line: Option<usize>, key: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(err(line, format!("`{key}` must be positive, got {x}")))
    }
}

/// Parses configuration text into a [`RunSpec`], applying defaults: `T =
/// 1800`, `lambda = 0.6`, `delta = 2`, `beta = 10`, `c ~ U[1, 10]`, unit
/// capacities, zero intervals, mechanism `hetero-omz`, seed 0.
pub fn parse_config(text: &str) -> Result<RunSpec, ConfigError> {
    parse_config_with(text, &[])
}

/// Like [`parse_config`], with `key = value` overrides applied after the
/// text. Errors in an override carry no line number.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunSpec, ConfigError> {
    let mut lines: Vec<(Option<usize>, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (Some(i + 1), l))
        .collect();
    lines.extend(overrides.iter().map(|o| (None, o.as_str())));
    let mut command = Command::Run;
    let mut horizon = 1800u32;
    let mut tasks: Option<u64> = None;
    let mut lambda = 0.6;
    let mut cost = CostDist::Uniform {
        low: 1.0,
        high: 10.0,
    };
    let mut capacity = CountDist::Constant(1);
    let mut interval = CountDist::Constant(0);
    let mut order = OrderModel::Iid;
    let mut omega = None;
    let mut instance_file = None;
    let mut mechanisms = vec![MechanismKind::HeteroOmz];
    let mut delta: f64 = 2.0;
    let mut settings = ExperimentSettings::default();
    let mut sweep_tasks: Option<Vec<u64>> = None;
    let mut sweep_lambdas: Option<Vec<f64>> = None;
    let mut seeds: Vec<u64> = vec![0];
    let mut output = OutputSpec::default();

    for (line, key, v) in entries(&lines)? {
        let l = line;
        match key {
            "command" => command = v.parse().map_err(|e| err(l, e))?,
            "instance.T" => {
                horizon = parse_num(line, key, &v)?;
                if horizon == 0 {
                    return Err(err(l, "`T` must be at least 1"));
                }
            }
            "instance.L" => {
                let x: u64 = parse_num(line, key, &v)?;
                if x == 0 {
                    return Err(err(l, "`L` must be at least 1"));
                }
                tasks = Some(x);
            }
            "instance.lambda" => lambda = positive(line, key, parse_num(line, key, &v)?)?,
            "instance.cost" => cost = parse_cost(line, &v)?,
            "instance.capacity" => capacity = parse_count(line, key, &v, 1)?,
            "instance.interval" => interval = parse_count(line, key, &v, 0)?,
            "instance.order" => {
                order = match v.as_str() {
                    "iid" => OrderModel::Iid,
                    "secretary" => OrderModel::Secretary,
                    _ => {
                        return Err(err(
                            l,
                            format!("`{key}`: expected iid or secretary, got `{v}`"),
                        ))
                    }
                }
            }
            "instance.omega" => omega = Some(positive(line, key, parse_num(line, key, &v)?)?),
            "instance.file" => instance_file = Some(PathBuf::from(v)),
            "mechanism.names" => {
                mechanisms = v
                    .split(',')
                    .map(|n| n.trim().parse::<MechanismKind>().map_err(|e| err(l, e)))
                    .collect::<Result<_, _>>()?;
                let mut seen = Vec::new();
                mechanisms.retain(|m| {
                    let fresh = !seen.contains(m);
                    seen.push(*m);
                    fresh
                });
            }
            "mechanism.delta" => {
                delta = parse_num(line, key, &v)?;
                if !(delta >= 1.0 && delta.is_finite()) {
                    return Err(err(l, format!("`delta` must be at least 1, got {delta}")));
                }
            }
            "mechanism.beta" => settings.beta = positive(line, key, parse_num(line, key, &v)?)?,
            "mechanism.random_trials" => {
                settings.random_trials = parse_num(line, key, &v)?;
                if settings.random_trials == 0 {
                    return Err(err(l, "`random_trials` must be at least 1"));
                }
            }
            "mechanism.random_range" => {
                let (low, high): (f64, f64) = parse_pair(line, key, &v)?;
                if !(low > 0.0 && low <= high) {
                    return Err(err(l, format!("`{key}`: need 0 < low <= high")));
                }
                settings.random_range = (low, high);
            }
            "sweep.L" => {
                let xs = parse_u64_list(line, key, &v)?;
                if xs.contains(&0) {
                    return Err(err(l, "`sweep.L` values must be at least 1"));
                }
                sweep_tasks = Some(xs);
            }
            "sweep.lambda" => {
                let xs = parse_f64_list(line, key, &v)?;
                for &x in &xs {
                    positive(line, key, x)?;
                }
                sweep_lambdas = Some(xs);
            }
            "sweep.seeds" => {
                let n: u64 = parse_num(line, key, &v)?;
                seeds = (0..n).collect();
            }
            "sweep.seed_list" => seeds = parse_u64_list(line, key, &v)?,
            "output.dir" => output.dir = Some(PathBuf::from(v)),
            "output.format" => output.format = v.parse().map_err(|e| err(l, e))?,
            "output.layout" => output.layout = v.parse().map_err(|e| err(l, e))?,
            _ => unreachable!("key table and match arms disagree on `{key}`"),
        }
    }

    let needs_tasks = command != Command::VerifyExamples;
    let tasks = match (tasks, &sweep_tasks) {
        (Some(t), _) => t,
        (None, Some(xs)) if !xs.is_empty() => xs[0],
        (None, _) if !needs_tasks => 1,
        (None, _) => return Err(err(None, "`L` (instance.L) is required")),
    };
    let sweep = SweepSpec {
        tasks: sweep_tasks.unwrap_or_else(|| vec![tasks]),
        lambdas: sweep_lambdas.unwrap_or_else(|| vec![lambda]),
        seeds,
    };
    let instance = InstanceConfig {
        horizon,
        tasks,
        lambda,
        cost,
        capacity,
        interval,
        order,
        omega,
        seed: 0,
    };
    Ok(RunSpec {
        command,
        instance,
        instance_file,
        mechanisms,
        delta,
        settings,
        sweep,
        output,
    })
}

fn fmt_cost(d: &CostDist) -> String {
    match d {
        CostDist::Constant(x) => format!("constant {x}"),
        CostDist::Uniform { low, high } => format!("uniform {low} {high}"),
    }
}

fn fmt_count(d: &CountDist) -> String {
    match d {
        CountDist::Constant(x) => format!("constant {x}"),
        CountDist::Uniform { low, high } => format!("uniform {low} {high}"),
    }
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl RunSpec {
    /// Every setting written out explicitly; parses back to an equal spec.
    pub fn to_config_text(&self) -> String {
        let i = &self.instance;
        let mut lines = vec![
            format!("command = {}", self.command.as_str()),
            format!("instance.T = {}", i.horizon),
            format!("instance.L = {}", i.tasks),
            format!("instance.lambda = {}", i.lambda),
            format!("instance.cost = {}", fmt_cost(&i.cost)),
            format!("instance.capacity = {}", fmt_count(&i.capacity)),
            format!("instance.interval = {}", fmt_count(&i.interval)),
            format!(
                "instance.order = {}",
                match i.order {
                    OrderModel::Iid => "iid",
                    OrderModel::Secretary => "secretary",
                }
            ),
        ];
        if let Some(w) = i.omega {
            lines.push(format!("instance.omega = {w}"));
        }
        if let Some(f) = &self.instance_file {
            lines.push(format!("instance.file = {}", f.display()));
        }
        lines.push(format!("mechanism.names = {}", join(&self.mechanisms)));
        lines.push(format!("mechanism.delta = {}", self.delta));
        lines.push(format!("mechanism.beta = {}", self.settings.beta));
        lines.push(format!(
            "mechanism.random_trials = {}",
            self.settings.random_trials
        ));
        let (lo, hi) = self.settings.random_range;
        lines.push(format!("mechanism.random_range = {lo} {hi}"));
        lines.push(format!("sweep.L = {}", join(&self.sweep.tasks)));
        lines.push(format!("sweep.lambda = {}", join(&self.sweep.lambdas)));
        lines.push(format!("sweep.seed_list = {}", join(&self.sweep.seeds)));
        if let Some(d) = &self.output.dir {
            lines.push(format!("output.dir = {}", d.display()));
        }
        lines.push(format!(
            "output.format = {}",
            match self.output.format {
                Format::Csv => "csv",
                Format::Json => "json",
            }
        ));
        lines.push(format!(
            "output.layout = {}",
            match self.output.layout {
                Layout::Wide => "wide",
                Layout::Long => "long",
            }
        ));
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let s = parse_config("L = 100\n").unwrap();
        assert_eq!(s.instance.tasks, 100);
        assert_eq!(s.instance.horizon, 1800);
        assert_eq!(s.instance.lambda, 0.6);
        assert_eq!(s.delta, 2.0);
        assert_eq!(s.settings.beta, 10.0);
        assert_eq!(
            s.instance.cost,
            CostDist::Uniform {
                low: 1.0,
                high: 10.0
            }
        );
        assert_eq!(s.instance, InstanceConfig::homogeneous(100));
        assert_eq!(s.sweep.tasks, vec![100]);
        assert_eq!(s.sweep.seeds, vec![0]);
    }

    #[test]
    fn empty_text_needs_tasks() {
        let e = parse_config("").unwrap_err();
        assert!(e.message.contains("`L`"), "{e}");
        assert!(parse_config("command = verify-examples").is_ok());
    }

    #[test]
    fn small_delta_rejected_with_line() {
        let e = parse_config("L = 10\n\ndelta = 0.5\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().starts_with("line 3:"));
        assert!(parse_config("L = 10\ndelta = 1").is_ok());
    }

    #[test]
    fn errors_name_their_line() {
        let cases = [
            ("L = 10\nfoo = 1", 2),
            ("L = 10\ninstance.lambda = -1", 2),
            ("L = x", 1),
            ("L = 10\ninstance.cost = uniform 5 1", 2),
            ("L = 10\nmechanism = best", 2),
            ("L = 10\njust words", 2),
            ("L = 10\nsweep.L = 400..100 step 100", 2),
            ("L = 10\ninstance.capacity = constant 0", 2),
            ("L = 10\noutput.format = xml", 2),
        ];
        for (text, line) in cases {
            assert_eq!(parse_config(text).unwrap_err().line, Some(line), "{text}");
        }
    }

    #[test]
    fn ranges_and_lists() {
        let s = parse_config(
            "sweep.L = 100..400 step 100\nsweep.lambda = 0.2..1 step 0.2\nseeds = 3\n",
        )
        .unwrap();
        assert_eq!(s.sweep.tasks, vec![100, 200, 300, 400]);
        assert_eq!(s.sweep.lambdas, vec![0.2, 0.4, 0.6, 0.8, 1.0]);
        assert_eq!(s.sweep.seeds, vec![0, 1, 2]);
        assert_eq!(s.instance.tasks, 100);
        let s = parse_config("L = 5\nsweep.seed_list = 7, 9\nmechanism = hetero-omz, hetero-omg")
            .unwrap();
        assert_eq!(s.sweep.seeds, vec![7, 9]);
        assert_eq!(
            s.mechanisms,
            vec![MechanismKind::HeteroOmz, MechanismKind::HeteroOmg]
        );
    }

    #[test]
    fn overrides_apply_last() {
        let s = parse_config_with(
            "L = 5\nT = 100",
            &["T = 50".into(), "mechanism = random, random".into()],
        )
        .unwrap();
        assert_eq!(s.instance.horizon, 50);
        assert_eq!(s.mechanisms, vec![MechanismKind::Random]);
        let e = parse_config_with("L = 5", &["delta = 0".into()]).unwrap_err();
        assert_eq!(e.line, None);
        assert!(parse_config_with("", &["L = 5".into()]).is_ok());
    }

    #[test]
    fn later_lines_override() {
        let s = parse_config("L = 5 # first\nL = 6").unwrap();
        assert_eq!(s.instance.tasks, 6);
    }

    #[test]
    fn round_trip() {
        let text = "command = sweep\nL = 300\ninstance.capacity = uniform 1 10\ninstance.interval = uniform 0 300\n\
                    instance.omega = 4\nmechanism = hetero-omg, random\ndelta = 8\nsweep.lambda = 0.2..1 step 0.2\n\
                    output.dir = out\noutput.format = json\noutput.layout = long\ninstance.file = users.txt\n";
        let spec = parse_config(text).unwrap();
        assert_eq!(parse_config(&spec.to_config_text()).unwrap(), spec);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip_random_specs(
                tasks in 1u64..5000,
                horizon in 1u32..5000,
                lambda in 0.01f64..5.0,
                delta in 1.0f64..10.0,
                lo in 0.1f64..5.0,
                width in 0.0f64..5.0,
                seeds in prop::collection::vec(any::<u64>(), 1..4),
                kinds in prop::collection::vec(0usize..4, 1..4),
            ) {
                let names: Vec<&str> = kinds.iter().map(|&k| MechanismKind::ALL[k].as_str()).collect();
                let text = format!(
                    "L = {tasks}\nT = {horizon}\nlambda = {lambda}\ndelta = {delta}\ninstance.cost = uniform {lo} {}\n\
                     sweep.seed_list = {}\nmechanism = {}\n",
                    lo + width,
                    join(&seeds),
                    names.join(","),
                );
                let spec = parse_config(&text).unwrap();
                prop_assert_eq!(parse_config(&spec.to_config_text()).unwrap(), spec);
            }
        }
    }
}
