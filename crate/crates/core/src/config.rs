//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! kernel = "power-law"
//! alpha = 0.5
//! ic = "monodisperse"
//! total_mass = 1
//! n = 64
//! t_end = 1
//! checks = monotone_mu0, monotone_mu1, mass_balance
//! out_dir = "out/power"
//! ```
//!
//! Values may be double-quoted. Relative paths (`table_file`, `ic_file`, `out_dir`) are
//! resolved against the directory holding the config file.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::diagnostics::Check;
use crate::error::{Error, Result};
use crate::integrator::{IntegratorOptions, Method};
use crate::kernel::{Family, KernelSpec, RateTable};
use crate::state::InitialCondition;

pub const KEYS: [&str; 19] = [
    "kernel",
    "alpha",
    "kappa",
    "table_file",
    "ic",
    "total_mass",
    "decay",
    "ic_file",
    "n",
    "method",
    "dt_init",
    "rel_tol",
    "abs_tol",
    "eps_neg",
    "t_end",
    "sample_every",
    "checks",
    "out_dir",
    "seed",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub ic: InitialCondition,
    pub n: usize,
    pub options: IntegratorOptions,
    pub checks: Vec<Check>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

struct Entry {
    value: String,
    line: usize,
}

struct Parsed<'a> {
    path: &'a str,
    entries: HashMap<String, Entry>,
}

impl Parsed<'_> {
    fn err(&self, line: usize, reason: impl Into<String>) -> Error {
        Error::Config {
            path: self.path.to_string(),
            line,
            reason: reason.into(),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| {
                self.err(e.line, format!("invalid {key}: cannot parse {:?}", e.value))
            }),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| self.err(0, format!("missing required key {key:?}")))
    }

    /// Re-attributes a validation error to the line of the offending key.
    fn at(&self, key: &str, e: Error) -> Error {
        match e {
            Error::Validation { field, reason } => {
                let line = self.line_of(&field).max(self.line_of(key));
                self.err(line, format!("invalid {field}: {reason}"))
            }
            other => other,
        }
    }
}

fn unquote(raw: &str) -> &str {
    let v = raw.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

fn parse_entries<'a>(path: &'a str, text: &str) -> Result<Parsed<'a>> {
    let mut parsed = Parsed {
        path,
        entries: HashMap::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(parsed.err(line, format!("expected `key = value`, got {content:?}")));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(parsed.err(line, format!("unknown key {key:?}")));
        }
        if let Some(prev) = parsed.entries.get(key) {
            return Err(parsed.err(
                line,
                format!("duplicate key {key:?} (first set on line {})", prev.line),
            ));
        }
        parsed.entries.insert(
            key.to_string(),
            Entry {
                value: unquote(value).to_string(),
                line,
            },
        );
    }
    Ok(parsed)
}

/// Comma- or whitespace-separated check names; `all` and `basic` expand to the named sets.
pub fn parse_checks(list: &str) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for tok in list.split(|c: char| c == ',' || c.is_whitespace()) {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let expanded: Vec<Check> = match tok {
            "all" => Check::ALL.to_vec(),
            "basic" => Check::BASIC.to_vec(),
            name => vec![name.parse()?],
        };
        for c in expanded {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&path.display().to_string(), &text, base)
    }

    /// `base` anchors relative paths.
    pub fn parse(name: &str, text: &str, base: &Path) -> Result<Self> {
        let p = parse_entries(name, text)?;
        let resolve = |rel: &str| {
            let rel = Path::new(rel);
            if rel.is_absolute() {
                rel.to_path_buf()
            } else {
                base.join(rel)
            }
        };

        let family: Family = p
            .required::<String>("kernel")?
            .parse()
            .map_err(|e| p.at("kernel", e))?;
        let kernel = match family {
            Family::RatioSum => KernelSpec::ratio_sum(),
            Family::Sum => KernelSpec::sum(),
            Family::Product => KernelSpec::product(),
            Family::PowerLaw => {
                let alpha: f64 = p.required("alpha")?;
                KernelSpec::power_law(alpha).map_err(|e| p.at("alpha", e))?
            }
            Family::Constant => {
                let kappa: f64 = p.get("kappa")?.unwrap_or(1.0);
                KernelSpec::constant(kappa).map_err(|e| p.at("kappa", e))?
            }
            Family::CustomTable => {
                let file: String = p.required("table_file")?;
                let table = RateTable::load(&resolve(&file)).map_err(|e| match e {
                    Error::Validation { reason, .. } => p.err(
                        p.line_of("table_file"),
                        format!("invalid table_file: {reason}"),
                    ),
                    other => other,
                })?;
                KernelSpec::table(table)
            }
        };

        let ic_kind = p.str("ic").unwrap_or("monodisperse").to_string();
        let total_mass: f64 = p.get("total_mass")?.unwrap_or(1.0);
        let ic = match ic_kind.as_str() {
            "monodisperse" => InitialCondition::monodisperse(total_mass),
            "exponential" => {
                let decay: f64 = p.required("decay")?;
                InitialCondition::exponential(total_mass, decay)
            }
            "file" => {
                let file: String = p.required("ic_file")?;
                InitialCondition::load(&resolve(&file))
            }
            other => {
                return Err(p.err(
                    p.line_of("ic"),
                    format!("invalid ic: {other:?} (expected monodisperse, exponential or file)"),
                ))
            }
        }
        .map_err(|e| p.at("ic", e))?;

        let n: usize = p.required("n")?;
        if n < 2 {
            return Err(p.err(p.line_of("n"), format!("invalid n: {n} (must be >= 2)")));
        }

        let defaults = IntegratorOptions::default();
        let method = match p.str("method") {
            None => defaults.method,
            Some(m) => m.parse::<Method>().map_err(|e| p.at("method", e))?,
        };
        let t_end: f64 = p.get("t_end")?.unwrap_or(defaults.t_end);
        let options = IntegratorOptions {
            method,
            dt_init: p
                .get("dt_init")?
                .unwrap_or(defaults.dt_init.min(t_end.max(f64::MIN_POSITIVE))),
            rel_tol: p.get("rel_tol")?.unwrap_or(defaults.rel_tol),
            abs_tol: p.get("abs_tol")?.unwrap_or(defaults.abs_tol),
            eps_neg: p.get("eps_neg")?.unwrap_or(defaults.eps_neg),
            t_end,
            sample_every: p.get("sample_every")?.unwrap_or(defaults.sample_every),
            record_steps: true,
        };
        options.validate().map_err(|e| p.at("t_end", e))?;

        let checks = match p.str("checks") {
            None => Check::BASIC.to_vec(),
            Some(list) => parse_checks(list).map_err(|e| p.at("checks", e))?,
        };
        let out_dir = resolve(p.str("out_dir").unwrap_or("out"));
        let seed: u64 = p.get("seed")?.unwrap_or(0);

        Ok(RunConfig {
            kernel,
            ic,
            n,
            options,
            checks,
            out_dir,
            seed,
        })
    }
}
