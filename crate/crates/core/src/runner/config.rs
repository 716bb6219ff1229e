//! Experiment configuration files.
//!
//! A config is a TOML document with a top-level `kind` and `seed` and one
//! section per module that the experiment touches:
//!
//! ```toml
//! kind = "spectrum"
//! seed = 7
//!
//! [lattice]
//! mode = "sl2z"
//!
//! [representation]
//! kind = "sym"
//! power = 3
//!
//! [spectrum]
//! trajectories = 8
//! horizon = 1e4
//! ```
//!
//! Parsing is strict: unknown keys, sections that the experiment kind does
//! not use, wrong types and out-of-range numbers are all errors, and every
//! error in a file is reported in one pass.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::origami::Origami;
use crate::oseledets::FlagKind;
use crate::representation::{direct_sum, sym_power, Representation, RepresentationBlock};
use crate::sl2::{FlowKind, Lattice, LatticeMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    Flags,
    Furstenberg,
    Inert,
    UniqueErgodicity,
    E1Concentration,
    Origami,
    Orbit,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Spectrum,
        ExperimentKind::Flags,
        ExperimentKind::Furstenberg,
        ExperimentKind::Inert,
        ExperimentKind::UniqueErgodicity,
        ExperimentKind::E1Concentration,
        ExperimentKind::Origami,
        ExperimentKind::Orbit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Flags => "flags",
            ExperimentKind::Furstenberg => "furstenberg",
            ExperimentKind::Inert => "inert",
            ExperimentKind::UniqueErgodicity => "unique-ergodicity",
            ExperimentKind::E1Concentration => "e1-concentration",
            ExperimentKind::Origami => "origami",
            ExperimentKind::Orbit => "orbit",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Sections this kind reads, besides `[output]`.
    fn sections(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Spectrum => &["lattice", "representation", "spectrum"],
            ExperimentKind::Flags => &["lattice", "representation", "spectrum", "flags"],
            ExperimentKind::Furstenberg => &["lattice", "representation", "spectrum", "furstenberg"],
            ExperimentKind::Inert => &["lattice", "representation", "spectrum", "inert"],
            ExperimentKind::UniqueErgodicity => &["lattice", "representation", "unique_ergodicity"],
            ExperimentKind::E1Concentration => &["lattice", "representation", "spectrum", "e1_concentration"],
            ExperimentKind::Origami => &["origami", "spectrum"],
            ExperimentKind::Orbit => &["origami"],
        }
    }

    fn uses_representation(self) -> bool {
        !matches!(self, ExperimentKind::Origami | ExperimentKind::Orbit)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How to build the fiber representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RepSpec {
    Standard,
    Trivial { dim: usize },
    Sym { power: usize },
    DirectSum { parts: Vec<RepSpec> },
    Explicit {
        dim: usize,
        images: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

impl RepSpec {
    pub fn build(&self, lattice: &Lattice) -> crate::Result<Representation> {
        match self {
            RepSpec::Standard => Ok(Representation::standard(lattice)),
            RepSpec::Trivial { dim } => Ok(Representation::trivial(*dim, lattice.mode())),
            RepSpec::Sym { power } => sym_power(&Representation::standard(lattice), *power),
            RepSpec::DirectSum { parts } => {
                let mut it = parts.iter();
                let first = it
                    .next()
                    .ok_or_else(|| crate::Error::InvalidArgument("empty direct sum".into()))?
                    .build(lattice)?;
                it.try_fold(first, |acc, p| direct_sum(&acc, &p.build(lattice)?))
            }
            RepSpec::Explicit { dim, images, label } => Representation::try_from(&RepresentationBlock {
                dim: *dim,
                mode: lattice.mode(),
                label: label.clone(),
                images: images.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSection {
    pub trajectories: usize,
    /// Flow time per trajectory.
    pub horizon: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagsSection {
    pub points: usize,
    pub horizon: f64,
    pub flag: FlagKind,
    pub motion: FlowKind,
    pub s: f64,
    /// Flag members to test; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurstenbergSection {
    pub trajectories: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InertSection {
    pub points: usize,
    pub samples: usize,
    pub j: usize,
    pub angle_tol: f64,
    pub horizon: f64,
    /// Fixed test vector; a random unit vector per point when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniqueErgodicitySection {
    pub starts: usize,
    pub horizon: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E1ConcentrationSection {
    pub starts: usize,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrigamiSection {
    /// Origamis in `"n; σ_h; σ_v"` form; more than one makes a family run.
    pub surfaces: Vec<String>,
    pub max_orbit: usize,
}

impl OrigamiSection {
    pub fn parsed(&self) -> crate::Result<Vec<Origami>> {
        self.surfaces.iter().map(|s| s.parse()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSection {
    pub mode: LatticeMode,
}

/// Where results go. Not part of the config hash.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_log: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<RepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origami: Option<OrigamiSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flags: Option<FlagsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub furstenberg: Option<FurstenbergSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inert: Option<InertSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unique_ergodicity: Option<UniqueErgodicitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e1_concentration: Option<E1ConcentrationSection>,
    #[serde(default, skip_serializing_if = "is_default_output")]
    pub output: OutputSection,
}

fn is_default_output(o: &OutputSection) -> bool {
    *o == OutputSection::default()
}

impl ExperimentConfig {
    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.lattice.map_or(LatticeMode::Sl2z, |l| l.mode))
    }

    /// The config with every default filled in, as TOML with sorted keys.
    /// Feeding it back to [`validate_config`] gives the same config.
    pub fn canonical_text(&self) -> String {
        let value = Value::try_from(self).expect("configs serialize to TOML");
        toml::to_string(&value).expect("TOML tables serialize")
    }

    /// SHA-256 of the canonical text without the `[output]` section, so that
    /// the same experiment written to another directory hashes the same.
    pub fn hash(&self) -> String {
        let mut numerical = self.clone();
        numerical.output = OutputSection::default();
        let digest = Sha256::digest(numerical.canonical_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Minimal spectrum config for a representation, with defaults elsewhere.
    pub fn spectrum(rep: RepSpec, seed: u64) -> Self {
        let text = format!("kind = \"spectrum\"\nseed = {seed}\n[representation]\nkind = \"standard\"\n");
        let mut cfg = validate_config(&text).unwrap_or_else(|_| unreachable!("the minimal config is valid"));
        cfg.representation = Some(rep);
        cfg
    }
}

/// One problem in a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based line, when the problem can be tied to one.
    pub line: Option<usize>,
    /// Dotted key path, e.g. `spectrum.horizon`; empty for document-level errors.
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if !self.field.is_empty() {
            write!(f, "{}: ", self.field)?;
        }
        f.write_str(&self.message)
    }
}

/// All the problems found in a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<Diagnostic>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Line numbers of keys, by dotted path (`parts[1].kind` for array entries).
struct LineIndex {
    starts: Vec<usize>,
    keys: HashMap<String, usize>,
}

impl LineIndex {
    fn new(text: &str) -> Self {
        let starts = std::iter::once(0).chain(text.match_indices('\n').map(|(i, _)| i + 1)).collect();
        let mut idx = LineIndex { starts, keys: HashMap::new() };
        let (doc, _) = toml::de::DeTable::parse_recoverable(text);
        idx.walk_table("", doc.get_ref());
        idx
    }

    fn line_of(&self, offset: usize) -> usize {
        self.starts.partition_point(|&s| s <= offset)
    }

    fn walk_table(&mut self, prefix: &str, table: &toml::de::DeTable<'_>) {
        for (k, v) in table.iter() {
            let path = join(prefix, k.get_ref());
            let line = self.line_of(k.span().start);
            self.keys.entry(path.clone()).or_insert(line);
            self.walk_value(&path, v.get_ref());
        }
    }

    fn walk_value(&mut self, path: &str, value: &toml::de::DeValue<'_>) {
        match value {
            toml::de::DeValue::Table(t) => self.walk_table(path, t),
            toml::de::DeValue::Array(a) => {
                for (i, item) in a.iter().enumerate() {
                    let p = format!("{path}[{i}]");
                    let line = self.line_of(item.span().start);
                    self.keys.entry(p.clone()).or_insert(line);
                    self.walk_value(&p, item.get_ref());
                }
            }
            _ => {}
        }
    }

    fn get(&self, path: &str) -> Option<usize> {
        self.keys.get(path).copied()
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Typed reads from a TOML table that record problems instead of stopping.
struct Checker {
    lines: LineIndex,
    diags: Vec<Diagnostic>,
}

impl Checker {
    fn error(&mut self, path: &str, message: impl Into<String>) {
        let line = self.lines.get(path).or_else(|| {
            // a missing key is reported at its section header
            path.rsplit_once('.').and_then(|(parent, _)| self.lines.get(parent))
        });
        self.diags.push(Diagnostic { line, field: path.to_string(), message: message.into() });
    }

    fn unknown_keys(&mut self, prefix: &str, table: &Table, allowed: &[&str]) {
        for k in table.keys() {
            if !allowed.contains(&k.as_str()) {
                self.error(&join(prefix, k), format!("unknown key (expected one of: {})", allowed.join(", ")));
            }
        }
    }

    fn section<'t>(&mut self, root: &'t Table, name: &str) -> Option<&'t Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.error(name, "expected a section");
                None
            }
        }
    }

    fn uint(&mut self, table: Option<&Table>, prefix: &str, key: &str, default: Option<usize>, min: usize) -> usize {
        let path = join(prefix, key);
        match table.and_then(|t| t.get(key)) {
            None => default.unwrap_or_else(|| {
                self.error(&path, "missing required key");
                min
            }),
            Some(Value::Integer(i)) if *i >= min as i64 => *i as usize,
            Some(Value::Integer(i)) => {
                let what = if min == 1 { "must be positive" } else { "is below the minimum" };
                self.error(&path, format!("{what} (got {i}, minimum {min})"));
                min
            }
            Some(v) => {
                self.error(&path, format!("expected an integer, got {}", v.type_str()));
                min
            }
        }
    }

    fn seed(&mut self, root: &Table) -> u64 {
        match root.get("seed") {
            None => 0,
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(Value::Integer(i)) => {
                self.error("seed", format!("must be non-negative (got {i})"));
                0
            }
            Some(v) => {
                self.error("seed", format!("expected an integer, got {}", v.type_str()));
                0
            }
        }
    }

    fn number(&mut self, path: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) if x.is_finite() => Some(*x),
            Value::Float(_) => {
                self.error(path, "must be finite");
                None
            }
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.error(path, format!("expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn positive(&mut self, table: Option<&Table>, prefix: &str, key: &str, default: f64) -> f64 {
        let path = join(prefix, key);
        let Some(v) = table.and_then(|t| t.get(key)) else { return default };
        match self.number(&path, v) {
            Some(x) if x > 0.0 => x,
            Some(x) => {
                self.error(&path, format!("must be positive (got {x})"));
                default
            }
            None => default,
        }
    }

    fn real(&mut self, table: Option<&Table>, prefix: &str, key: &str, default: f64) -> f64 {
        let path = join(prefix, key);
        match table.and_then(|t| t.get(key)) {
            None => default,
            Some(v) => self.number(&path, v).unwrap_or(default),
        }
    }

    fn string(&mut self, table: Option<&Table>, prefix: &str, key: &str) -> Option<String> {
        let path = join(prefix, key);
        match table.and_then(|t| t.get(key)) {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                self.error(&path, format!("expected a string, got {}", v.type_str()));
                None
            }
        }
    }

    fn choice<T: Copy>(&mut self, table: Option<&Table>, prefix: &str, key: &str, options: &[(&str, T)], default: T) -> T {
        let path = join(prefix, key);
        match self.string(table, prefix, key) {
            None => default,
            Some(s) => match options.iter().find(|(name, _)| *name == s) {
                Some((_, v)) => *v,
                None => {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    self.error(&path, format!("unknown value \"{s}\" (expected one of: {})", names.join(", ")));
                    default
                }
            },
        }
    }

    fn array<'t>(&mut self, table: Option<&'t Table>, prefix: &str, key: &str) -> Option<&'t Vec<Value>> {
        let path = join(prefix, key);
        match table.and_then(|t| t.get(key)) {
            None => None,
            Some(Value::Array(a)) => Some(a),
            Some(v) => {
                self.error(&path, format!("expected an array, got {}", v.type_str()));
                None
            }
        }
    }

    fn vector(&mut self, table: Option<&Table>, prefix: &str, key: &str) -> Option<Vec<f64>> {
        let path = join(prefix, key);
        let a = self.array(table, prefix, key)?;
        let out: Vec<Option<f64>> = a.iter().enumerate().map(|(i, v)| self.number(&format!("{path}[{i}]"), v)).collect();
        let out: Option<Vec<f64>> = out.into_iter().collect();
        if let Some(v) = &out {
            if v.is_empty() || v.iter().all(|x| *x == 0.0) {
                self.error(&path, "must be a non-zero vector");
                return None;
            }
        }
        out
    }

    fn rep_spec(&mut self, t: &Table, prefix: &str) -> Option<RepSpec> {
        let kind = match t.get("kind") {
            Some(Value::String(s)) => s.clone(),
            Some(v) => {
                self.error(&join(prefix, "kind"), format!("expected a string, got {}", v.type_str()));
                return None;
            }
            None => {
                self.error(&join(prefix, "kind"), "missing representation kind");
                return None;
            }
        };
        let t = Some(t);
        let spec = match kind.as_str() {
            "standard" => {
                self.unknown_keys(prefix, t?, &["kind"]);
                RepSpec::Standard
            }
            "trivial" => {
                self.unknown_keys(prefix, t?, &["kind", "dim"]);
                RepSpec::Trivial { dim: self.uint(t, prefix, "dim", Some(1), 1) }
            }
            "sym" => {
                self.unknown_keys(prefix, t?, &["kind", "power"]);
                RepSpec::Sym { power: self.uint(t, prefix, "power", None, 1) }
            }
            "direct-sum" => {
                self.unknown_keys(prefix, t?, &["kind", "parts"]);
                let path = join(prefix, "parts");
                let Some(parts) = self.array(t, prefix, "parts") else {
                    self.error(&path, "missing required key");
                    return None;
                };
                if parts.is_empty() {
                    self.error(&path, "needs at least one part");
                    return None;
                }
                let mut specs = Vec::new();
                for (i, p) in parts.iter().enumerate() {
                    let pp = format!("{path}[{i}]");
                    match p {
                        Value::Table(pt) => specs.push(self.rep_spec(pt, &pp)),
                        other => {
                            self.error(&pp, format!("expected a table, got {}", other.type_str()));
                            specs.push(None);
                        }
                    }
                }
                RepSpec::DirectSum { parts: specs.into_iter().collect::<Option<Vec<_>>>()? }
            }
            "explicit" => {
                self.unknown_keys(prefix, t?, &["kind", "dim", "images", "label"]);
                let dim = self.uint(t, prefix, "dim", None, 1);
                let label = self.string(t, prefix, "label");
                let path = join(prefix, "images");
                let Some(raw) = self.array(t, prefix, "images") else {
                    self.error(&path, "missing required key");
                    return None;
                };
                let mut images = Vec::new();
                for (i, m) in raw.iter().enumerate() {
                    let mp = format!("{path}[{i}]");
                    match m {
                        Value::Array(entries) => {
                            let row: Vec<Option<f64>> =
                                entries.iter().enumerate().map(|(k, e)| self.number(&format!("{mp}[{k}]"), e)).collect();
                            images.push(row.into_iter().collect::<Option<Vec<f64>>>()?);
                        }
                        other => {
                            self.error(&mp, format!("expected a row-major matrix, got {}", other.type_str()));
                            return None;
                        }
                    }
                }
                RepSpec::Explicit { dim, images, label }
            }
            other => {
                self.error(
                    &join(prefix, "kind"),
                    format!("unknown representation \"{other}\" (expected standard, trivial, sym, direct-sum or explicit)"),
                );
                return None;
            }
        };
        Some(spec)
    }
}

const TOP_KEYS: [&str; 12] = [
    "kind",
    "seed",
    "lattice",
    "representation",
    "origami",
    "spectrum",
    "flags",
    "furstenberg",
    "inert",
    "unique_ergodicity",
    "e1_concentration",
    "output",
];

/// Strictly parses a config, reporting every problem at once.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let lines = LineIndex::new(text);
    let (_, syntax) = toml::de::DeTable::parse_recoverable(text);
    if !syntax.is_empty() {
        let diags = syntax
            .iter()
            .map(|e| Diagnostic {
                line: e.span().map(|s| lines.line_of(s.start)),
                field: String::new(),
                message: e.message().trim().to_string(),
            })
            .collect();
        return Err(ConfigErrors(diags));
    }
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigErrors(vec![Diagnostic {
            line: e.span().map(|s| lines.line_of(s.start)),
            field: String::new(),
            message: e.message().trim().to_string(),
        }])
    })?;
    let mut c = Checker { lines, diags: Vec::new() };

    let kind = match root.get("kind") {
        None => {
            c.diags.push(Diagnostic { line: None, field: String::new(), message: "missing experiment kind".into() });
            None
        }
        Some(Value::String(s)) => match ExperimentKind::from_name(s) {
            Some(k) => Some(k),
            None => {
                let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                c.error("kind", format!("unknown experiment kind \"{s}\" (expected one of: {})", names.join(", ")));
                None
            }
        },
        Some(v) => {
            c.error("kind", format!("expected a string, got {}", v.type_str()));
            None
        }
    };
    c.unknown_keys("", &root, &TOP_KEYS);
    let seed = c.seed(&root);
    if let Some(k) = kind {
        for s in &TOP_KEYS[2..TOP_KEYS.len() - 1] {
            if root.contains_key(*s) && !k.sections().contains(s) {
                c.error(s, format!("section is not used by experiment kind \"{k}\""));
            }
        }
    }
    let Some(kind) = kind else { return Err(ConfigErrors(c.diags)) };
    let uses = |s: &str| kind.sections().contains(&s);

    let lattice_mode = if uses("lattice") {
        let t = c.section(&root, "lattice");
        if let Some(t) = t {
            c.unknown_keys("lattice", t, &["mode"]);
        }
        Some(c.choice(t, "lattice", "mode", &[("sl2z", LatticeMode::Sl2z), ("free", LatticeMode::Free)], LatticeMode::Sl2z))
    } else {
        None
    };
    let lattice = Lattice::new(lattice_mode.unwrap_or(LatticeMode::Sl2z));

    let mut rep_dim = None;
    let representation = if kind.uses_representation() {
        match c.section(&root, "representation") {
            None if root.contains_key("representation") => None,
            None => {
                c.diags.push(Diagnostic {
                    line: None,
                    field: "representation".into(),
                    message: format!("experiment kind \"{kind}\" needs a [representation] section"),
                });
                None
            }
            Some(t) => {
                let spec = c.rep_spec(t, "representation");
                if let Some(s) = &spec {
                    match s.build(&lattice) {
                        Ok(rep) => rep_dim = Some(rep.dim()),
                        Err(e) => c.error("representation", format!("cannot build representation: {e}")),
                    }
                }
                spec
            }
        }
    } else {
        None
    };

    let origami = if uses("origami") {
        let t = c.section(&root, "origami");
        if t.is_none() && !root.contains_key("origami") {
            c.diags.push(Diagnostic {
                line: None,
                field: "origami".into(),
                message: format!("experiment kind \"{kind}\" needs an [origami] section"),
            });
        }
        t.map(|t| {
            c.unknown_keys("origami", t, &["surfaces", "max_orbit"]);
            let mut surfaces = Vec::new();
            match c.array(Some(t), "origami", "surfaces") {
                None => c.error("origami.surfaces", "missing required key"),
                Some(a) if a.is_empty() => c.error("origami.surfaces", "needs at least one origami"),
                Some(a) => {
                    for (i, v) in a.iter().enumerate() {
                        let p = format!("origami.surfaces[{i}]");
                        match v {
                            Value::String(s) => match s.parse::<Origami>() {
                                Ok(_) => surfaces.push(s.clone()),
                                Err(e) => c.error(&p, format!("invalid origami: {e}")),
                            },
                            other => c.error(&p, format!("expected a string, got {}", other.type_str())),
                        }
                    }
                }
            }
            if kind == ExperimentKind::Orbit && surfaces.len() > 1 {
                c.error("origami.surfaces", "an orbit experiment takes exactly one origami");
            }
            OrigamiSection { surfaces, max_orbit: c.uint(Some(t), "origami", "max_orbit", Some(10_000), 1) }
        })
    } else {
        None
    };

    let spectrum = uses("spectrum").then(|| {
        let t = c.section(&root, "spectrum");
        if let Some(t) = t {
            c.unknown_keys("spectrum", t, &["trajectories", "horizon", "dt"]);
        }
        let s = SpectrumSection {
            trajectories: c.uint(t, "spectrum", "trajectories", Some(8), 1),
            horizon: c.positive(t, "spectrum", "horizon", 1e4),
            dt: c.positive(t, "spectrum", "dt", 1.0),
        };
        if s.dt > s.horizon {
            c.error("spectrum.dt", "must not exceed spectrum.horizon");
        }
        s
    });

    let flags = uses("flags").then(|| {
        let t = c.section(&root, "flags");
        if let Some(t) = t {
            c.unknown_keys("flags", t, &["points", "horizon", "flag", "motion", "s", "members"]);
        }
        let members = c.array(t, "flags", "members").map(|a| {
            a.iter()
                .enumerate()
                .filter_map(|(i, v)| match v {
                    Value::Integer(j) if *j >= 1 => Some(*j as usize),
                    _ => {
                        c.error(&format!("flags.members[{i}]"), "expected a positive integer");
                        None
                    }
                })
                .collect::<Vec<_>>()
        });
        FlagsSection {
            points: c.uint(t, "flags", "points", Some(50), 1),
            horizon: c.positive(t, "flags", "horizon", 100.0),
            flag: c.choice(t, "flags", "flag", &[("forward", FlagKind::Forward), ("backward", FlagKind::Backward)], FlagKind::Backward),
            motion: c.choice(
                t,
                "flags",
                "motion",
                &[
                    ("geodesic", FlowKind::Geodesic),
                    ("horocycle+", FlowKind::HorocyclePlus),
                    ("horocycle-", FlowKind::HorocycleMinus),
                ],
                FlowKind::HorocyclePlus,
            ),
            s: c.real(t, "flags", "s", 1.0),
            members,
        }
    });

    let furstenberg = uses("furstenberg").then(|| {
        let t = c.section(&root, "furstenberg");
        if let Some(t) = t {
            c.unknown_keys("furstenberg", t, &["trajectories", "horizon"]);
        }
        FurstenbergSection {
            trajectories: c.uint(t, "furstenberg", "trajectories", Some(16), 1),
            horizon: c.uint(t, "furstenberg", "horizon", Some(5000), 1),
        }
    });

    let inert = uses("inert").then(|| {
        let t = c.section(&root, "inert");
        if let Some(t) = t {
            c.unknown_keys("inert", t, &["points", "samples", "j", "angle_tol", "horizon", "vector"]);
        }
        InertSection {
            points: c.uint(t, "inert", "points", Some(4), 1),
            samples: c.uint(t, "inert", "samples", Some(1000), 1),
            j: c.uint(t, "inert", "j", Some(2), 1),
            angle_tol: c.positive(t, "inert", "angle_tol", crate::probes::DEFAULT_ANGLE_TOL),
            horizon: c.positive(t, "inert", "horizon", crate::probes::REFERENCE_HORIZON),
            vector: c.vector(t, "inert", "vector"),
        }
    });

    let unique_ergodicity = uses("unique_ergodicity").then(|| {
        let t = c.section(&root, "unique_ergodicity");
        if let Some(t) = t {
            c.unknown_keys("unique_ergodicity", t, &["starts", "horizon", "step"]);
        }
        let s = UniqueErgodicitySection {
            starts: c.uint(t, "unique_ergodicity", "starts", Some(10), 2),
            horizon: c.positive(t, "unique_ergodicity", "horizon", 1e4),
            step: c.positive(t, "unique_ergodicity", "step", 1.0),
        };
        if s.step > s.horizon {
            c.error("unique_ergodicity.step", "must not exceed unique_ergodicity.horizon");
        }
        s
    });

    let e1_concentration = uses("e1_concentration").then(|| {
        let t = c.section(&root, "e1_concentration");
        if let Some(t) = t {
            c.unknown_keys("e1_concentration", t, &["starts", "horizon", "vector"]);
        }
        E1ConcentrationSection {
            starts: c.uint(t, "e1_concentration", "starts", Some(100), 1),
            horizon: c.uint(t, "e1_concentration", "horizon", Some(50), 1),
            vector: c.vector(t, "e1_concentration", "vector"),
        }
    });

    if let Some(d) = rep_dim {
        for (path, v) in [
            ("inert.vector", inert.as_ref().and_then(|s| s.vector.as_ref())),
            ("e1_concentration.vector", e1_concentration.as_ref().and_then(|s| s.vector.as_ref())),
        ] {
            if let Some(v) = v {
                if v.len() != d {
                    c.error(path, format!("has length {} but the representation has dimension {d}", v.len()));
                }
            }
        }
    }

    let out_t = c.section(&root, "output");
    if let Some(t) = out_t {
        c.unknown_keys("output", t, &["dir", "prefix", "run_log"]);
    }
    let output = OutputSection {
        dir: c.string(out_t, "output", "dir"),
        prefix: c.string(out_t, "output", "prefix"),
        run_log: c.string(out_t, "output", "run_log"),
    };
    if let Some(p) = &output.prefix {
        if p.is_empty() || p.contains(['/', '\\']) {
            c.error("output.prefix", "must be a non-empty file name without path separators");
        }
    }

    if !c.diags.is_empty() {
        return Err(ConfigErrors(c.diags));
    }
    Ok(ExperimentConfig {
        kind,
        seed,
        lattice: lattice_mode.map(|mode| LatticeSection { mode }),
        representation,
        origami,
        spectrum,
        flags,
        furstenberg,
        inert,
        unique_ergodicity,
        e1_concentration,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(text: &str) -> Vec<Diagnostic> {
        validate_config(text).unwrap_err().0
    }

    #[test]
    fn empty_file_is_missing_kind() {
        let e = errors("");
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].message, "missing experiment kind");
    }

    #[test]
    fn negative_horizon_names_the_field() {
        let e = errors("kind = \"spectrum\"\n[representation]\nkind = \"standard\"\n[spectrum]\nhorizon = -5\n");
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].field, "spectrum.horizon");
        assert_eq!(e[0].line, Some(5));
        assert!(e[0].to_string().contains("spectrum.horizon"), "{}", e[0]);
    }

    #[test]
    fn all_errors_are_reported_together() {
        let text = "kind = \"flags\"\nseed = -1\nbogus = 1\n[representation]\nkind = \"sym\"\n\
                    [flags]\npoints = 0\nmotion = \"sideways\"\n[furstenberg]\nhorizon = 3\n";
        let e = errors(text);
        let fields: Vec<&str> = e.iter().map(|d| d.field.as_str()).collect();
        for f in ["seed", "bogus", "representation.power", "flags.points", "flags.motion", "furstenberg"] {
            assert!(fields.contains(&f), "missing {f} in {fields:?}");
        }
        let line_of = |f: &str| e.iter().find(|d| d.field == f).unwrap().line;
        assert_eq!(line_of("bogus"), Some(3));
        assert_eq!(line_of("flags.points"), Some(7));
        assert_eq!(line_of("furstenberg"), Some(9));
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let e = errors("kind = \"spectrum\"\nseed = = 3\n");
        assert_eq!(e[0].line, Some(2));
    }

    #[test]
    fn minimal_config_echoes_canonically() {
        let cfg = validate_config("kind = \"spectrum\"\n[representation]\nkind = \"standard\"\n").unwrap();
        let text = cfg.canonical_text();
        assert_eq!(
            text,
            "kind = \"spectrum\"\nseed = 0\n\n[lattice]\nmode = \"sl2z\"\n\n[representation]\nkind = \"standard\"\n\n\
             [spectrum]\ndt = 1.0\nhorizon = 10000.0\ntrajectories = 8\n"
        );
        assert_eq!(validate_config(&text).unwrap(), cfg);
    }

    #[test]
    fn numbers_normalize_before_hashing() {
        let a = validate_config("kind = \"spectrum\"\n[representation]\nkind = \"standard\"\n[spectrum]\nhorizon = 10000\n").unwrap();
        let b = validate_config("seed = 0\nkind = \"spectrum\"\n[spectrum]\nhorizon = 1e4\n[representation]\nkind = \"standard\"\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.output.dir = Some("elsewhere".into());
        assert_eq!(a.hash(), c.hash());
        c.seed = 1;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn representations_build_and_are_checked() {
        let ok = "kind = \"spectrum\"\n[representation]\nkind = \"direct-sum\"\n\
                  parts = [{ kind = \"standard\" }, { kind = \"trivial\", dim = 2 }]\n";
        let cfg = validate_config(ok).unwrap();
        assert_eq!(cfg.representation.as_ref().unwrap().build(&cfg.lattice()).unwrap().dim(), 4);

        let bad = "kind = \"spectrum\"\n[lattice]\nmode = \"sl2z\"\n[representation]\nkind = \"explicit\"\ndim = 1\nimages = [[1.0], [2.0]]\n";
        let e = errors(bad);
        assert_eq!(e[0].field, "representation");
        assert!(e[0].message.contains("cannot build"), "{}", e[0]);
    }

    #[test]
    fn origami_sections_parse_surfaces() {
        let cfg = validate_config("kind = \"orbit\"\n[origami]\nsurfaces = [\"3; (1,2); (1,3)\"]\n").unwrap();
        assert_eq!(cfg.origami.unwrap().parsed().unwrap()[0].n(), 3);
        let e = errors("kind = \"orbit\"\n[origami]\nsurfaces = [\"3; (1,2); (4,5)\"]\n");
        assert_eq!(e[0].field, "origami.surfaces[0]");
        assert_eq!(e[0].line, Some(3));
    }
}
