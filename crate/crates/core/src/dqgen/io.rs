//! Plain-text rule files and the on-disk rule cache.
//!
//! ```text
//! # comment
//! dim 2
//! order 3
//! nodes 4
//! family normal
//! epsilon 3.1401849173675503e-16
//! seed 0
//! provenance dq
//! ordering graded-lex
//! -1.0000000000000000e0 -1.0000000000000000e0 2.5000000000000000e-1
//! ...
//! ```
//!
//! Every data row holds `dim` coordinates followed by the weight, printed
//! with 17 significant digits so that a round trip is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use super::{cache_key, generate_dq_with, DqOptions, DqOutcome, Provenance, QuadratureRule};
use crate::error::{Error, Result};
use crate::orthopoly::WeightFamily;

/// Environment variable naming the rule cache directory.
pub const RULE_CACHE_ENV: &str = "DQUAD_RULE_CACHE";

const EXTENSION: &str = "rule";

/// Serialises a rule to the text format.
pub fn write_rule(rule: &QuadratureRule) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dim {}", rule.dim());
    let _ = writeln!(s, "order {}", rule.order());
    let _ = writeln!(s, "nodes {}", rule.len());
    let _ = writeln!(s, "family {}", rule.family().name());
    let _ = writeln!(s, "epsilon {:.16e}", rule.residual());
    let _ = writeln!(s, "seed {}", rule.seed());
    let _ = writeln!(s, "provenance {}", rule.provenance().name());
    let _ = writeln!(s, "ordering graded-lex");
    for q in 0..rule.len() {
        for x in rule.node(q) {
            let _ = write!(s, "{x:.16e} ");
        }
        let _ = writeln!(s, "{:.16e}", rule.weights()[q]);
    }
    s
}

/// Writes through a temporary file and a rename, so concurrent readers
/// never see a half-written rule.
pub fn save_rule(rule: &QuadratureRule, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, write_rule(rule))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Parses a rule file without checking rule invariants. The stored epsilon
/// is kept as written.
pub fn parse_rule(path: &Path) -> Result<QuadratureRule> {
    let text = fs::read_to_string(path)?;
    parse_rule_text(&text, path)
}

/// Parses a rule file and re-verifies every invariant, including the
/// recomputed moment residual.
pub fn load_rule(path: &Path) -> Result<QuadratureRule> {
    let rule = parse_rule(path)?;
    rule.verify()?;
    Ok(rule)
}

fn parse_rule_text(text: &str, path: &Path) -> Result<QuadratureRule> {
    let bad = |line: usize, msg: String| Error::MalformedRule {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut dim = None;
    let mut order = None;
    let mut nodes = None;
    let mut family = None;
    let mut epsilon = None;
    let mut seed = None;
    let mut provenance = Provenance::Dq;
    let mut coords = Vec::new();
    let mut weights = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let first = tokens.next().unwrap_or_default();
        if first.starts_with(|c: char| c.is_ascii_alphabetic()) && first.parse::<f64>().is_err() {
            if !weights.is_empty() {
                return Err(bad(lineno, format!("header `{first}` after data rows")));
            }
            let value = tokens.next().ok_or_else(|| bad(lineno, format!("`{first}` has no value")))?;
            if tokens.next().is_some() {
                return Err(bad(lineno, format!("`{first}` takes a single value")));
            }
            let int = |v: &str| v.parse::<u64>().map_err(|e| bad(lineno, format!("`{first}`: {e}")));
            match first {
                "dim" => dim = Some(int(value)? as usize),
                "order" => order = Some(int(value)? as u32),
                "nodes" => nodes = Some(int(value)? as usize),
                "seed" => seed = Some(int(value)?),
                "family" => family = Some(value.parse::<WeightFamily>().map_err(|e| bad(lineno, e.to_string()))?),
                "epsilon" => {
                    epsilon = Some(value.parse::<f64>().map_err(|e| bad(lineno, format!("`epsilon`: {e}")))?)
                }
                "provenance" => {
                    provenance = Provenance::parse(value).ok_or_else(|| bad(lineno, format!("unknown provenance `{value}`")))?
                }
                "ordering" => {
                    if value != "graded-lex" {
                        return Err(bad(lineno, format!("unsupported ordering `{value}`")));
                    }
                }
                other => return Err(bad(lineno, format!("unknown header `{other}`"))),
            }
            continue;
        }
        let d = dim.ok_or_else(|| bad(lineno, "data row before the `dim` header".into()))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| bad(lineno, format!("`{t}`: {e}"))))
            .collect::<Result<_>>()?;
        if row.len() != d + 1 {
            return Err(bad(lineno, format!("expected {} values, found {}", d + 1, row.len())));
        }
        coords.extend_from_slice(&row[..d]);
        weights.push(row[d]);
    }

    let end = text.lines().count();
    let missing = |name: &str| bad(end, format!("missing `{name}` header"));
    let dim = dim.ok_or_else(|| missing("dim"))?;
    let order = order.ok_or_else(|| missing("order"))?;
    let n = nodes.ok_or_else(|| missing("nodes"))?;
    let family = family.ok_or_else(|| missing("family"))?;
    let epsilon = epsilon.ok_or_else(|| missing("epsilon"))?;
    let seed = seed.ok_or_else(|| missing("seed"))?;
    if weights.len() != n {
        return Err(bad(end, format!("header says {n} nodes but {} rows follow", weights.len())));
    }
    QuadratureRule::from_parts(
        family,
        order,
        DMatrix::from_vec(dim, n, coords),
        DVector::from_vec(weights),
        epsilon,
        seed,
        provenance,
    )
}

/// Directory of rule files named `<key>.rule`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleCache {
    dir: PathBuf,
}

impl RuleCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        RuleCache { dir: dir.into() }
    }

    /// Explicit directory, else `$DQUAD_RULE_CACHE`, else `./rules`.
    pub fn resolve(flag: Option<&Path>) -> Self {
        if let Some(dir) = flag {
            return Self::new(dir);
        }
        match std::env::var_os(RULE_CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Self::new(dir),
            _ => Self::new("rules"),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.{EXTENSION}"))
    }

    /// Loads and verifies the rule stored under `key`.
    pub fn load(&self, key: &str) -> Result<QuadratureRule> {
        let path = self.path_for(key);
        if !path.is_file() {
            return Err(Error::RuleNotFound {
                key: key.to_string(),
                tried: vec![path],
            });
        }
        load_rule(&path)
    }

    pub fn store(&self, rule: &QuadratureRule) -> Result<PathBuf> {
        let path = self.path_for(&rule.cache_key());
        save_rule(rule, &path)?;
        Ok(path)
    }

    /// Cached rule for `(family, d, r, n)`, generating and storing it on a miss.
    pub fn get_or_generate(
        &self,
        family: WeightFamily,
        dim: usize,
        order: u32,
        nodes: usize,
        opts: &DqOptions,
    ) -> Result<DqOutcome> {
        let key = cache_key(family, dim, order, nodes);
        let path = self.path_for(&key);
        if path.is_file() {
            let rule = load_rule(&path)?;
            if rule.residual() <= opts.eps_target {
                return Ok(DqOutcome::Converged(rule));
            }
        }
        let outcome = generate_dq_with(family, dim, order, nodes, opts)?;
        if let DqOutcome::Converged(rule) = &outcome {
            self.store(rule)?;
        }
        Ok(outcome)
    }

    /// Finds a rule given a path, a path missing its `.rule` extension, or a
    /// bare cache key.
    pub fn locate(&self, spec: &str) -> Result<PathBuf> {
        let given = PathBuf::from(spec);
        let mut tried = vec![given.clone()];
        if given.is_file() {
            return Ok(given);
        }
        let mut with_ext = given.clone().into_os_string();
        with_ext.push(format!(".{EXTENSION}"));
        let with_ext = PathBuf::from(with_ext);
        tried.push(with_ext.clone());
        if with_ext.is_file() {
            return Ok(with_ext);
        }
        let key = given.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        let key = key.strip_suffix(".rule").unwrap_or(&key).to_string();
        let cached = self.path_for(&key);
        tried.push(cached.clone());
        if cached.is_file() {
            return Ok(cached);
        }
        Err(Error::RuleNotFound { key, tried })
    }
}
