//! Line-oriented scenario files: a filtered space, measures, utility layers,
//! named acts and strategy parameters, each optionally tagged with a
//! variant. Saving a loaded file reproduces it byte for byte when it was
//! itself written by [`Scenario::save`].

use std::fmt::Write as _;
use std::path::Path;

use crate::curve::MonotoneCurve;
use crate::engine::Representation;
use crate::error::{Error, Result};
use crate::field::UtilityField;
use crate::space::{Act, FilteredSpace, ProbabilityMeasure};

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSection {
    pub variant: Option<String>,
    pub measure: ProbabilityMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilitySection {
    pub time_index: usize,
    pub variant: Option<String>,
    /// One curve per atom at `time_index`.
    pub curves: Vec<MonotoneCurve>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedAct {
    pub name: String,
    pub act: Act,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    /// Declared variants; the first is the default and is served by the
    /// untagged sections.
    pub variants: Vec<String>,
    pub space: FilteredSpace,
    pub measures: Vec<MeasureSection>,
    pub utilities: Vec<UtilitySection>,
    pub acts: Vec<NamedAct>,
    /// Free key/value parameters of the strategy set, in file order.
    pub strategies: Vec<(String, String)>,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// A `key = value` line with the 1-based columns of both parts.
struct Entry<'a> {
    line: usize,
    key: &'a str,
    key_col: usize,
    value: &'a str,
    value_col: usize,
}

struct Section<'a> {
    line: usize,
    kind: &'a str,
    /// `key=value` qualifiers from the header, with their columns.
    qualifiers: Vec<(&'a str, &'a str, usize)>,
    entries: Vec<Entry<'a>>,
}

impl<'a> Section<'a> {
    fn qualifier(&self, key: &str) -> Option<(&'a str, usize)> {
        self.qualifiers
            .iter()
            .find(|(k, _, _)| *k == key)
            .map(|(_, v, c)| (*v, *c))
    }

    fn check_qualifiers(&self, allowed: &[&str]) -> Result<()> {
        for (k, _, c) in &self.qualifiers {
            if !allowed.contains(k) {
                return Err(parse_err(self.line, *c, format!("unknown qualifier `{k}` in [{}]", self.kind)));
            }
        }
        Ok(())
    }

    fn time(&self) -> Result<usize> {
        let (v, c) = self
            .qualifier("t")
            .ok_or_else(|| parse_err(self.line, 1, format!("[{}] needs a `t=<index>` qualifier", self.kind)))?;
        v.parse()
            .map_err(|_| parse_err(self.line, c, format!("time index `{v}` is not a nonnegative integer")))
    }

    fn variant(&self) -> Option<String> {
        self.qualifier("variant").map(|(v, _)| v.to_string())
    }

    fn get(&self, key: &str) -> Option<&Entry<'a>> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn require(&self, key: &str) -> Result<&Entry<'a>> {
        self.get(key)
            .ok_or_else(|| parse_err(self.line, 1, format!("[{}] is missing `{key}`", self.kind)))
    }
}

fn column_of(line: &str, part: &str) -> usize {
    (part.as_ptr() as usize - line.as_ptr() as usize) + 1
}

fn split_sections(text: &str) -> Result<Vec<Section<'_>>> {
    let mut sections: Vec<Section> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line, raw.len() + 1, "section header is missing `]`"))?;
            let mut tokens = inner.split_whitespace();
            let kind = tokens
                .next()
                .ok_or_else(|| parse_err(line, column_of(raw, trimmed), "empty section header"))?;
            let mut qualifiers = Vec::new();
            let mut name = None;
            for tok in tokens {
                match tok.split_once('=') {
                    Some((key, v)) => qualifiers.push((key, v, column_of(raw, tok))),
                    None if kind == "act" && name.is_none() => name = Some((tok, column_of(raw, tok))),
                    None => {
                        return Err(parse_err(line, column_of(raw, tok), format!("expected `key=value`, found `{tok}`")))
                    }
                }
            }
            if let Some((n, c)) = name {
                qualifiers.insert(0, ("name", n, c));
            }
            sections.push(Section {
                line,
                kind,
                qualifiers,
                entries: Vec::new(),
            });
            continue;
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| parse_err(line, column_of(raw, trimmed), "entry before the first section"))?;
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| parse_err(line, column_of(raw, trimmed), "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(parse_err(line, column_of(raw, trimmed), "empty key"));
        }
        section.entries.push(Entry {
            line,
            key,
            key_col: column_of(raw, key),
            value,
            value_col: if value.is_empty() { raw.len() + 1 } else { column_of(raw, value) },
        });
    }
    Ok(sections)
}

fn list(value: &str) -> Vec<&str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn number(e: &Entry, text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(e.line, e.value_col, format!("`{}` is not a finite number", text.trim())))
}

fn parse_space(sec: &Section) -> Result<FilteredSpace> {
    sec.check_qualifiers(&[])?;
    let states: Vec<String> = list(sec.require("states")?.value)
        .into_iter()
        .map(String::from)
        .collect();
    let times_entry = sec.require("times")?;
    let times = list(times_entry.value)
        .into_iter()
        .map(|t| number(times_entry, t))
        .collect::<Result<Vec<f64>>>()?;
    let mut partitions = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let e = sec.require(&format!("t{i}"))?;
        let mut atoms = Vec::new();
        for block in e.value.split('|') {
            let mut atom = Vec::new();
            for name in list(block) {
                let s = states.iter().position(|x| x == name).ok_or_else(|| {
                    parse_err(e.line, column_of_value(e, name), format!("unknown state `{name}`"))
                })?;
                atom.push(s);
            }
            atoms.push(atom);
        }
        partitions.push(atoms);
    }
    for e in &sec.entries {
        let known = e.key == "states"
            || e.key == "times"
            || e.key
                .strip_prefix('t')
                .and_then(|d| d.parse::<usize>().ok())
                .is_some_and(|i| i < times.len());
        if !known {
            return Err(parse_err(e.line, e.key_col, format!("unexpected key `{}` in [space]", e.key)));
        }
    }
    FilteredSpace::new(states, times, partitions)
        .map_err(|err| Error::Scenario(format!("[space] at line {}: {err}", sec.line)))
}

fn column_of_value(e: &Entry, part: &str) -> usize {
    match e.value.find(part) {
        Some(k) => e.value_col + k,
        None => e.value_col,
    }
}

/// Key naming an atom: its states joined by ", ".
fn atom_key(space: &FilteredSpace, i: usize, a: usize) -> String {
    space
        .atom(i, a)
        .iter()
        .map(|&s| space.state_name(s))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Maps each entry of a per-atom section to its atom at `i`; every atom must
/// appear exactly once.
fn per_atom<'s, T>(
    sec: &'s Section,
    space: &FilteredSpace,
    i: usize,
    parse: impl Fn(&Entry<'s>) -> Result<T>,
) -> Result<Vec<T>> {
    let mut slots: Vec<Option<T>> = (0..space.n_atoms(i)).map(|_| None).collect();
    for e in &sec.entries {
        let names = list(e.key);
        let a = (0..space.n_atoms(i))
            .find(|&a| {
                let atom = space.atom(i, a);
                atom.len() == names.len()
                    && names
                        .iter()
                        .all(|n| space.state_index(n).is_some_and(|s| atom.contains(&s)))
            })
            .ok_or_else(|| {
                parse_err(e.line, e.key_col, format!("`{}` is not an atom at time index {i}", e.key))
            })?;
        if slots[a].is_some() {
            return Err(parse_err(e.line, e.key_col, format!("atom `{}` listed twice", e.key)));
        }
        slots[a] = Some(parse(e)?);
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(a, v)| {
            v.ok_or_else(|| {
                parse_err(sec.line, 1, format!("[{}] does not cover atom `{}`", sec.kind, atom_key(space, i, a)))
            })
        })
        .collect()
}

fn parse_curve(e: &Entry) -> Result<MonotoneCurve> {
    e.value
        .parse::<MonotoneCurve>()
        .map_err(|err| parse_err(e.line, e.value_col + err.offset, err.message))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario> {
        let sections = split_sections(text)?;
        if sections.is_empty() {
            return Err(parse_err(1, 1, "empty scenario: expected a [scenario] section"));
        }
        let head = &sections[0];
        if head.kind != "scenario" {
            return Err(parse_err(head.line, 2, "the file must start with [scenario]"));
        }
        head.check_qualifiers(&[])?;
        let name = head.require("name")?.value.to_string();
        let description = head.get("description").map(|e| e.value.to_string());
        let variants: Vec<String> = head
            .get("variants")
            .map(|e| list(e.value).into_iter().map(String::from).collect())
            .unwrap_or_default();
        let space_sec = sections
            .iter()
            .find(|s| s.kind == "space")
            .ok_or_else(|| parse_err(head.line, 1, "missing [space] section"))?;
        let space = parse_space(space_sec)?;

        let mut scenario = Scenario {
            name,
            description,
            variants,
            space,
            measures: Vec::new(),
            utilities: Vec::new(),
            acts: Vec::new(),
            strategies: Vec::new(),
        };
        let check_variant = |sec: &Section, v: &Option<String>| -> Result<()> {
            if let Some(v) = v {
                if !scenario_variants(head).iter().any(|x| x == v) {
                    let (_, c) = sec.qualifier("variant").expect("present");
                    return Err(parse_err(sec.line, c, format!("variant `{v}` is not declared in [scenario]")));
                }
            }
            Ok(())
        };
        for sec in &sections[1..] {
            match sec.kind {
                "space" => {
                    if !std::ptr::eq(sec, space_sec) {
                        return Err(parse_err(sec.line, 2, "duplicate [space] section"));
                    }
                }
                "measure" => {
                    sec.check_qualifiers(&["variant"])?;
                    let variant = sec.variant();
                    check_variant(sec, &variant)?;
                    let sp = &scenario.space;
                    let mut weights: Vec<Option<f64>> = vec![None; sp.n_states()];
                    for e in &sec.entries {
                        let s = sp.state_index(e.key).ok_or_else(|| {
                            parse_err(e.line, e.key_col, format!("unknown state `{}`", e.key))
                        })?;
                        if weights[s].is_some() {
                            return Err(parse_err(e.line, e.key_col, format!("state `{}` listed twice", e.key)));
                        }
                        weights[s] = Some(number(e, e.value)?);
                    }
                    let weights = weights
                        .into_iter()
                        .enumerate()
                        .map(|(s, w)| {
                            w.ok_or_else(|| {
                                parse_err(sec.line, 1, format!("[measure] has no weight for `{}`", sp.state_name(s)))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let measure = ProbabilityMeasure::new(weights)
                        .map_err(|err| Error::Scenario(format!("[measure] at line {}: {err}", sec.line)))?;
                    scenario.measures.push(MeasureSection { variant, measure });
                }
                "utility" => {
                    sec.check_qualifiers(&["t", "variant"])?;
                    let i = sec.time()?;
                    if i >= scenario.space.n_times() {
                        let (_, c) = sec.qualifier("t").expect("present");
                        return Err(parse_err(sec.line, c, format!("time index {i} is out of range")));
                    }
                    let variant = sec.variant();
                    check_variant(sec, &variant)?;
                    let curves = per_atom(sec, &scenario.space, i, parse_curve)?;
                    scenario.utilities.push(UtilitySection {
                        time_index: i,
                        variant,
                        curves,
                    });
                }
                "act" => {
                    sec.check_qualifiers(&["name", "t"])?;
                    let (name, _) = sec
                        .qualifier("name")
                        .ok_or_else(|| parse_err(sec.line, 2, "[act] needs a name"))?;
                    let i = sec.time()?;
                    if i >= scenario.space.n_times() {
                        let (_, c) = sec.qualifier("t").expect("present");
                        return Err(parse_err(sec.line, c, format!("time index {i} is out of range")));
                    }
                    if scenario.acts.iter().any(|a| a.name == name) {
                        return Err(parse_err(sec.line, 2, format!("act `{name}` defined twice")));
                    }
                    let values = per_atom(sec, &scenario.space, i, |e| number(e, e.value))?;
                    let act = scenario.space.act_from_atoms(i, &values)?;
                    scenario.acts.push(NamedAct {
                        name: name.to_string(),
                        act,
                    });
                }
                "strategies" => {
                    sec.check_qualifiers(&[])?;
                    scenario.strategies = sec
                        .entries
                        .iter()
                        .map(|e| (e.key.to_string(), e.value.to_string()))
                        .collect();
                }
                "scenario" => return Err(parse_err(sec.line, 2, "duplicate [scenario] section")),
                other => return Err(parse_err(sec.line, 2, format!("unknown section [{other}]"))),
            }
        }
        if !scenario.measures.iter().any(|m| m.variant.is_none()) {
            return Err(parse_err(head.line, 1, "missing an untagged [measure] section"));
        }
        for i in 0..scenario.space.n_times() {
            if !scenario.utilities.iter().any(|u| u.time_index == i && u.variant.is_none()) {
                return Err(parse_err(head.line, 1, format!("missing an untagged [utility t={i}] section")));
            }
        }
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.render())?;
        Ok(())
    }

    /// The canonical text form.
    pub fn render(&self) -> String {
        let sp = &self.space;
        let mut out = String::new();
        let _ = writeln!(out, "[scenario]\nname = {}", self.name);
        if let Some(d) = &self.description {
            let _ = writeln!(out, "description = {d}");
        }
        if !self.variants.is_empty() {
            let _ = writeln!(out, "variants = {}", self.variants.join(", "));
        }
        let _ = writeln!(out, "\n[space]\nstates = {}", sp.states().join(", "));
        let times: Vec<String> = sp.times().iter().map(|t| t.to_string()).collect();
        let _ = writeln!(out, "times = {}", times.join(", "));
        for i in 0..sp.n_times() {
            let atoms: Vec<String> = (0..sp.n_atoms(i)).map(|a| atom_key(sp, i, a)).collect();
            let _ = writeln!(out, "t{i} = {}", atoms.join(" | "));
        }
        let variant = |v: &Option<String>| v.as_ref().map(|v| format!(" variant={v}")).unwrap_or_default();
        for m in &self.measures {
            let _ = writeln!(out, "\n[measure{}]", variant(&m.variant));
            for (s, w) in m.measure.weights().iter().enumerate() {
                let _ = writeln!(out, "{} = {w}", sp.state_name(s));
            }
        }
        for u in &self.utilities {
            let _ = writeln!(out, "\n[utility t={}{}]", u.time_index, variant(&u.variant));
            for (a, c) in u.curves.iter().enumerate() {
                let _ = writeln!(out, "{} = {c}", atom_key(sp, u.time_index, a));
            }
        }
        for a in &self.acts {
            let i = a.act.time_index;
            let _ = writeln!(out, "\n[act {} t={i}]", a.name);
            for (k, v) in sp.atom_values(&a.act).iter().enumerate() {
                let _ = writeln!(out, "{} = {v}", atom_key(sp, i, k));
            }
        }
        if !self.strategies.is_empty() {
            let _ = writeln!(out, "\n[strategies]");
            for (k, v) in &self.strategies {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    fn resolve_variant<'v>(&'v self, variant: Option<&'v str>) -> Result<Option<&'v str>> {
        match variant {
            None => Ok(None),
            Some(v) if self.variants.first().map(String::as_str) == Some(v) => Ok(None),
            Some(v) if self.variants.iter().any(|x| x == v) => Ok(Some(v)),
            Some(v) => Err(Error::Scenario(format!(
                "unknown variant `{v}`; declared: {}",
                if self.variants.is_empty() { "none".to_string() } else { self.variants.join(", ") }
            ))),
        }
    }

    /// The measure for a variant, falling back to the untagged section.
    pub fn measure(&self, variant: Option<&str>) -> Result<&ProbabilityMeasure> {
        let v = self.resolve_variant(variant)?;
        let tagged = v.and_then(|v| self.measures.iter().find(|m| m.variant.as_deref() == Some(v)));
        Ok(&tagged
            .or_else(|| self.measures.iter().find(|m| m.variant.is_none()))
            .expect("validated on load")
            .measure)
    }

    /// Per-atom curves at `i` for a variant.
    pub fn utility(&self, i: usize, variant: Option<&str>) -> Result<&[MonotoneCurve]> {
        let v = self.resolve_variant(variant)?;
        let tagged = v.and_then(|v| {
            self.utilities
                .iter()
                .find(|u| u.time_index == i && u.variant.as_deref() == Some(v))
        });
        Ok(&tagged
            .or_else(|| self.utilities.iter().find(|u| u.time_index == i && u.variant.is_none()))
            .ok_or_else(|| Error::Scenario(format!("no utility at time index {i}")))?
            .curves)
    }

    /// The representation of a variant; u0 is the time-0 curve.
    pub fn representation(&self, variant: Option<&str>) -> Result<Representation> {
        let layers = (0..self.space.n_times())
            .map(|i| self.utility(i, variant).map(<[MonotoneCurve]>::to_vec))
            .collect::<Result<Vec<_>>>()?;
        let u0 = layers[0][0].clone();
        let field = UtilityField::new(&self.space, layers)?;
        Representation::new(self.space.clone(), self.measure(variant)?.clone(), field, u0)
    }

    pub fn act(&self, name: &str) -> Result<&Act> {
        self.acts
            .iter()
            .find(|a| a.name == name)
            .map(|a| &a.act)
            .ok_or_else(|| Error::Scenario(format!("no act named `{name}`")))
    }

    pub fn strategy(&self, key: &str) -> Option<&str> {
        self.strategies
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// A scenario holding one representation, with no acts or strategies.
    pub fn from_representation(name: &str, rep: &Representation) -> Scenario {
        let sp = rep.space();
        Scenario {
            name: name.to_string(),
            description: None,
            variants: Vec::new(),
            space: sp.clone(),
            measures: vec![MeasureSection {
                variant: None,
                measure: rep.measure().clone(),
            }],
            utilities: (0..sp.n_times())
                .map(|i| UtilitySection {
                    time_index: i,
                    variant: None,
                    curves: rep.field().layer(i),
                })
                .collect(),
            acts: Vec::new(),
            strategies: Vec::new(),
        }
    }
}

fn scenario_variants<'a>(head: &Section<'a>) -> Vec<&'a str> {
    head.get("variants").map(|e| list(e.value)).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "[scenario]
name = small
variants = base, steep

[space]
states = a, b, c
times = 0, 1
t0 = a, b, c
t1 = a, b | c

[measure]
a = 0.25
b = 0.25
c = 0.5

[utility t=0]
a, b, c = identity

[utility t=1]
a, b = exp(1)
c = pl((-1, -2), (0, 0), (1, 0.5))

[utility t=1 variant=steep]
a, b = linear(3)
c = identity

[act f t=1]
a, b = 1.5
c = -0.25

[strategies]
fractions = 0, 0.5, 1
";

    #[test]
    fn canonical_text_round_trips() {
        let sc = Scenario::parse(SMALL).unwrap();
        assert_eq!(sc.render(), SMALL);
        assert_eq!(sc.act("f").unwrap().values, vec![1.5, 1.5, -0.25]);
        assert_eq!(sc.strategy("fractions"), Some("0, 0.5, 1"));
        let steep = sc.representation(Some("steep")).unwrap();
        assert_eq!(steep.field().atom_curve(1, 0), &MonotoneCurve::linear(3.0).unwrap());
        let base = sc.representation(Some("base")).unwrap();
        assert_eq!(base, sc.representation(None).unwrap());
        assert!(sc.representation(Some("other")).is_err());
    }

    #[test]
    fn file_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.sdu");
        std::fs::write(&p, SMALL).unwrap();
        let sc = Scenario::load(&p).unwrap();
        let q = dir.path().join("t.sdu");
        sc.save(&q).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
    }

    #[test]
    fn errors_carry_positions() {
        let err = Scenario::parse("").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, column: 1, .. }));

        let bad = SMALL.replace("c = pl((-1, -2), (0, 0), (1, 0.5))", "c = pl((-1, -2), (0, x))");
        match Scenario::parse(&bad).unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 21);
                assert_eq!(column, 5 + 17);
            }
            other => panic!("{other:?}"),
        }

        let bad = SMALL.replace("t1 = a, b | c", "t1 = a, b | q");
        assert!(matches!(
            Scenario::parse(&bad).unwrap_err(),
            Error::Parse { line: 9, column: 13, .. }
        ));
    }

    #[test]
    fn non_refining_partition_names_the_atom() {
        let bad = SMALL
            .replace("times = 0, 1", "times = 0, 1, 2")
            .replace("t1 = a, b | c", "t1 = a, b | c\nt2 = a | b, c");
        let err = Scenario::parse(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Scenario(_)));
        assert!(msg.contains("{b, c}"), "{msg}");
    }
}
