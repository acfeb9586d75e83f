//! Replay files: one user per line, `id arrival departure capacity cost`.
//! Blank lines and `#` comments are skipped.

use std::fmt::Write as _;

use frugal_core::model::validate_instance;
use frugal_core::{Profile, UserProfile};

use crate::config::ConfigError;

pub fn parse_instance(text: &str, horizon: u32) -> Result<Vec<Profile>, ConfigError> {
    let mut users = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = Some(i + 1);
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let bad = |what: &str| ConfigError {
            line,
            message: format!("{what} in `{content}`"),
        };
        let [id, a, d, cap, cost] = fields.as_slice() else {
            return Err(bad("expected `id arrival departure capacity cost`"));
        };
        let user = UserProfile::new(
            id.parse().map_err(|_| bad("bad id"))?,
            a.parse().map_err(|_| bad("bad arrival"))?,
            d.parse().map_err(|_| bad("bad departure"))?,
            cap.parse().map_err(|_| bad("bad capacity"))?,
            cost.parse::<f64>().map_err(|_| bad("bad cost"))?,
        );
        frugal_core::model::validate_profile(user, horizon).map_err(|e| ConfigError {
            line,
            message: e.to_string(),
        })?;
        users.push(user);
    }
    validate_instance(&users, horizon).map_err(|e| ConfigError {
        line: None,
        message: e.to_string(),
    })?;
    Ok(users)
}

pub fn format_instance(users: &[Profile]) -> String {
    let mut out = String::from("# id arrival departure capacity cost\n");
    for u in users {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            u.id, u.arrival, u.departure, u.capacity, u.unit_cost
        );
    }
    out
}
