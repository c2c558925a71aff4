//! Line-oriented `key = value` format with `[section]` headers.
//!
//! ```text
//! [model]
//! n = 2
//! row1 = 2, 0
//! row2 = 0, 1
//!
//! [species.1]
//! b = 0
//! eta = 1
//! phi0_initial = 0.2
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::DMatrix;

use crate::model::{ForcingSignal, ModelParams};
use crate::solver::SolverSettings;

use super::{ConfigError, OutputOptions, ScenarioConfig};

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Number(f64),
    Text(String),
    List(Vec<f64>),
}

#[derive(Debug)]
struct Entry {
    value: Value,
    line: usize,
}

#[derive(Debug, Default)]
struct Document {
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
}

fn syntax(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Syntax {
        line,
        message: message.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    let mut escaped = false;
    for (i, ch) in line.char_indices() {
        match ch {
            _ if escaped => escaped = false,
            '\\' if quoted => escaped = true,
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_string(raw: &str, line: usize) -> Result<String, ConfigError> {
    let inner = raw
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .filter(|_| raw.len() >= 2)
        .ok_or_else(|| syntax(line, format!("unterminated string {raw}")))?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '\\' => match chars.next() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                other => {
                    return Err(syntax(line, format!("bad escape sequence \\{}", other.unwrap_or(' '))))
                }
            },
            '"' => return Err(syntax(line, "unescaped quote inside string")),
            _ => out.push(ch),
        }
    }
    Ok(out)
}

fn parse_number(raw: &str, line: usize) -> Result<f64, ConfigError> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| syntax(line, format!("`{}` is not a number", raw.trim())))
}

fn parse_value(raw: &str, line: usize) -> Result<Value, ConfigError> {
    if raw.is_empty() {
        return Err(syntax(line, "missing value"));
    }
    if raw.starts_with('"') {
        return parse_string(raw, line).map(Value::Text);
    }
    if raw.contains(',') {
        return raw
            .split(',')
            .map(|item| parse_number(item, line))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::List);
    }
    if let Ok(x) = raw.parse::<f64>() {
        return Ok(Value::Number(x));
    }
    if raw.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Ok(Value::Text(raw.to_string()));
    }
    Err(syntax(line, format!("cannot parse value `{raw}`")))
}

fn valid_section(name: &str) -> bool {
    match name {
        "scenario" | "model" | "solver" | "output" | "forcing.nutrient" | "forcing.antibiotic" => {
            true
        }
        _ => name
            .strip_prefix("species.")
            .is_some_and(|i| !i.is_empty() && i.bytes().all(|b| b.is_ascii_digit())),
    }
}

fn tokenize(text: &str) -> Result<Document, ConfigError> {
    let mut doc = Document::default();
    let mut current: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw_line).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| syntax(line, "section header is missing `]`"))?
                .trim();
            if !valid_section(name) {
                return Err(syntax(line, format!("unknown section [{name}]")));
            }
            if doc.sections.contains_key(name) {
                return Err(syntax(line, format!("section [{name}] appears twice")));
            }
            doc.sections.insert(name.to_string(), (line, BTreeMap::new()));
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| syntax(line, "expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(syntax(line, format!("invalid key `{key}`")));
        }
        let section = current
            .as_ref()
            .ok_or_else(|| syntax(line, "key appears before any section header"))?;
        let value = parse_value(value.trim(), line)?;
        let entries = &mut doc.sections.get_mut(section).expect("section registered").1;
        if entries.contains_key(key) {
            return Err(syntax(line, format!("duplicate key `{key}` in [{section}]")));
        }
        entries.insert(key.to_string(), Entry { value, line });
    }
    Ok(doc)
}

/// Typed access to one section; remembers which keys were consumed.
struct Section<'a> {
    name: String,
    entries: Option<&'a BTreeMap<String, Entry>>,
    used: BTreeSet<&'a str>,
}

impl<'a> Section<'a> {
    fn new(doc: &'a Document, name: &str) -> Self {
        Self {
            name: name.to_string(),
            entries: doc.sections.get(name).map(|(_, e)| e),
            used: BTreeSet::new(),
        }
    }

    fn full(&self, key: &str) -> String {
        format!("{}.{}", self.name, key)
    }

    fn get(&mut self, key: &str) -> Option<&'a Entry> {
        let (k, entry) = self.entries?.get_key_value(key)?;
        self.used.insert(k.as_str());
        Some(entry)
    }

    fn invalid(&self, key: &str, entry: &Entry, message: &str) -> ConfigError {
        ConfigError::InvalidValue {
            key: self.full(key),
            message: format!("line {}: {message}", entry.line),
        }
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => match e.value {
                Value::Number(x) => Ok(Some(x)),
                _ => Err(self.invalid(key, e, "expected a number")),
            },
        }
    }

    fn required_number(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.number(key)?
            .ok_or_else(|| ConfigError::MissingKey(self.full(key)))
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => match e.value {
                Value::Number(x) if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 => {
                    Ok(Some(x as usize))
                }
                _ => Err(self.invalid(key, e, "expected a non-negative integer")),
            },
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => match &e.value {
                Value::List(v) => Ok(Some(v.clone())),
                Value::Number(x) => Ok(Some(vec![*x])),
                Value::Text(_) => Err(self.invalid(key, e, "expected a list of numbers")),
            },
        }
    }

    fn text(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => match &e.value {
                Value::Text(s) => Ok(Some(s.clone())),
                _ => Err(self.invalid(key, e, "expected a string")),
            },
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(entries) = self.entries {
            if let Some((key, e)) = entries.iter().find(|(k, _)| !self.used.contains(k.as_str())) {
                return Err(ConfigError::UnknownKey {
                    line: e.line,
                    key: self.full(key),
                });
            }
        }
        Ok(())
    }
}

fn forcing(doc: &Document, which: &str) -> Result<ForcingSignal, ConfigError> {
    let mut s = Section::new(doc, &format!("forcing.{which}"));
    let kind = s
        .text("kind")?
        .ok_or_else(|| ConfigError::MissingKey(s.full("kind")))?;
    let signal = match kind.as_str() {
        "constant" => ForcingSignal::Constant {
            value: s.required_number("value")?,
        },
        "sinusoid" => ForcingSignal::Sinusoid {
            offset: s.required_number("offset")?,
            amplitude: s.required_number("amplitude")?,
            angular_frequency: s.required_number("angular_frequency")?,
        },
        "step" => ForcingSignal::Step {
            switch_step: s
                .count("switch_step")?
                .ok_or_else(|| ConfigError::MissingKey(s.full("switch_step")))?,
            before: s.required_number("before")?,
            after: s.required_number("after")?,
        },
        other => {
            return Err(ConfigError::InvalidValue {
                key: s.full("kind"),
                message: format!("`{other}` is not one of constant, sinusoid, step"),
            })
        }
    };
    s.finish()?;
    Ok(signal)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let doc = tokenize(text)?;

    let mut scenario = Section::new(&doc, "scenario");
    let name = scenario.text("name")?.unwrap_or_else(|| "custom".into());
    let description = scenario.text("description")?.unwrap_or_default();
    scenario.finish()?;

    let mut model = Section::new(&doc, "model");
    let n = model
        .count("n")?
        .ok_or_else(|| ConfigError::MissingKey("model.n".into()))?;
    if n == 0 {
        return Err(ConfigError::InvalidValue {
            key: "model.n".into(),
            message: "at least one species is required".into(),
        });
    }
    let mut rows = Vec::with_capacity(n);
    for i in 1..=n {
        let key = format!("row{i}");
        let row = model
            .list(&key)?
            .ok_or_else(|| ConfigError::MissingKey(format!("model.{key}")))?;
        if row.len() != n {
            return Err(ConfigError::InvalidValue {
                key: format!("model.{key}"),
                message: format!("expected {n} entries, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    let eta0 = model.number("eta0")?;
    let barrier_scale = model.number("barrier_scale")?;
    let gamma_in_psi = match model.number("gamma_in_psi")? {
        None => false,
        Some(0.0) => false,
        Some(1.0) => true,
        Some(x) => {
            return Err(ConfigError::InvalidValue {
                key: "model.gamma_in_psi".into(),
                message: format!("expected 0 or 1, got {x}"),
            })
        }
    };
    model.finish()?;

    for (section, (line, _)) in &doc.sections {
        if let Some(i) = section.strip_prefix("species.") {
            let i: usize = i.parse().unwrap_or(0);
            if i == 0 || i > n {
                return Err(syntax(*line, format!("[{section}] does not match n = {n}")));
            }
        }
    }

    let mut b = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    let mut initial_phi = Vec::with_capacity(n);
    let mut initial_psi = Vec::with_capacity(n);
    for i in 1..=n {
        let mut s = Section::new(&doc, &format!("species.{i}"));
        b.push(s.required_number("b")?);
        let e = s.required_number("eta")?;
        if !(e > 0.0) {
            return Err(ConfigError::NonPositiveViscosity {
                species: i,
                value: e,
            });
        }
        eta.push(e);
        initial_phi.push(s.required_number("phi0_initial")?);
        initial_psi.push(s.number("psi_initial")?.unwrap_or(1.0));
        s.finish()?;
    }

    let growth = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let mut params = ModelParams::new(growth, b, eta)?.with_gamma_in_psi(gamma_in_psi);
    if let Some(x) = eta0 {
        params = params.with_empty_viscosity(x).map_err(|e| ConfigError::InvalidValue {
            key: "model.eta0".into(),
            message: e.to_string(),
        })?;
    }
    if let Some(x) = barrier_scale {
        params = params.with_barrier_scale(x).map_err(|e| ConfigError::InvalidValue {
            key: "model.barrier_scale".into(),
            message: e.to_string(),
        })?;
    }

    let nutrient = forcing(&doc, "nutrient")?;
    let antibiotic = forcing(&doc, "antibiotic")?;

    let mut s = Section::new(&doc, "solver");
    let d = SolverSettings::default();
    let solver = SolverSettings {
        dt: s.number("dt")?.unwrap_or(d.dt),
        steps: s.count("steps")?.unwrap_or(d.steps),
        residual_tolerance: s.number("residual_tolerance")?.unwrap_or(d.residual_tolerance),
        max_newton_iterations: s
            .count("max_newton_iterations")?
            .unwrap_or(d.max_newton_iterations),
        max_halvings: s.count("max_halvings")?.unwrap_or(d.max_halvings),
        steady_state_tolerance: s
            .number("steady_state_tolerance")?
            .unwrap_or(d.steady_state_tolerance),
        max_step_splits: s
            .count("max_step_splits")?
            .map(|k| k as u32)
            .unwrap_or(d.max_step_splits),
    };
    s.finish()?;

    let mut s = Section::new(&doc, "output");
    let output = OutputOptions {
        stride: s.count("stride")?.unwrap_or(1),
        path: s.text("path")?.map(PathBuf::from),
    };
    s.finish()?;

    let config = ScenarioConfig {
        name,
        description,
        params,
        initial_phi,
        initial_psi,
        nutrient,
        antibiotic,
        solver,
        output,
    };
    config.validate()?;
    Ok(config)
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(ch),
        }
    }
    out.push('"');
    out
}

fn write_forcing(out: &mut String, which: &str, f: &ForcingSignal) {
    let _ = writeln!(out, "\n[forcing.{which}]\nkind = \"{}\"", f.kind());
    match *f {
        ForcingSignal::Constant { value } => {
            let _ = writeln!(out, "value = {value:?}");
        }
        ForcingSignal::Sinusoid {
            offset,
            amplitude,
            angular_frequency,
        } => {
            let _ = writeln!(
                out,
                "offset = {offset:?}\namplitude = {amplitude:?}\nangular_frequency = {angular_frequency:?}"
            );
        }
        ForcingSignal::Step {
            switch_step,
            before,
            after,
        } => {
            let _ = writeln!(
                out,
                "switch_step = {switch_step}\nbefore = {before:?}\nafter = {after:?}"
            );
        }
    }
}

/// Renders a config as a document that [`parse_config`] reads back to an
/// identical value. Numbers use the shortest exact representation.
pub fn serialize(config: &ScenarioConfig) -> String {
    let p = &config.params;
    let n = p.n();
    let mut out = String::new();
    let _ = writeln!(out, "[scenario]\nname = {}", quote(&config.name));
    let _ = writeln!(out, "description = {}", quote(&config.description));
    let _ = writeln!(out, "\n[model]\nn = {n}");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:?}", p.growth()[(i, j)])).collect();
        let _ = writeln!(out, "row{} = {}", i + 1, row.join(", "));
    }
    let _ = writeln!(out, "eta0 = {:?}", p.empty_viscosity());
    let _ = writeln!(out, "barrier_scale = {:?}", p.barrier_scale());
    let _ = writeln!(out, "gamma_in_psi = {}", u8::from(p.gamma_in_psi()));
    for i in 0..n {
        let _ = writeln!(
            out,
            "\n[species.{}]\nb = {:?}\neta = {:?}\nphi0_initial = {:?}\npsi_initial = {:?}",
            i + 1,
            p.sensitivity()[i],
            p.viscosity()[i],
            config.initial_phi[i],
            config.initial_psi[i]
        );
    }
    write_forcing(&mut out, "nutrient", &config.nutrient);
    write_forcing(&mut out, "antibiotic", &config.antibiotic);
    let s = &config.solver;
    let _ = writeln!(
        out,
        "\n[solver]\ndt = {:?}\nsteps = {}\nresidual_tolerance = {:?}\nmax_newton_iterations = {}\nmax_halvings = {}\nsteady_state_tolerance = {:?}\nmax_step_splits = {}",
        s.dt,
        s.steps,
        s.residual_tolerance,
        s.max_newton_iterations,
        s.max_halvings,
        s.steady_state_tolerance,
        s.max_step_splits
    );
    let _ = writeln!(out, "\n[output]\nstride = {}", config.output.stride);
    if let Some(path) = &config.output.path {
        let _ = writeln!(out, "path = {}", quote(&path.to_string_lossy()));
    }
    out
}
