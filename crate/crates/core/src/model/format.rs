//! Line-oriented instance file format.
//!
//! ```text
//! [problem]
//! vars = x1 x2
//! minimize = (x1+1)^2 + x2        # or: minimize_max = e1 ; e2
//! convex = false
//! box = -3 3 ; -3 3
//!
//! [index n]
//! kind = countable                # finite | interval | countable
//! start = 2
//! truncation = 10000
//! limit_ray = 0 -1
//!
//! [constraints]
//! g1 = x1 + 1
//! g(n) = x1^3/(3*n) - x2
//!
//! [equalities]
//! h1 = x1 + x2
//! affine = true
//!
//! [solver]
//! starts = 8
//! ```
//!
//! Interval sections take `lower`, `upper`, `include_lower`, `include_upper`,
//! `resolution` and `levels`; finite sections take `values`, a list of
//! numbers or `label:number` pairs.

use std::collections::BTreeMap;
use std::path::Path;

use crate::expr::{parse_in, Degree, Expr, Scope};

use super::{
    ConstraintFamily, Cost, EqualityBlock, IndexSetDescriptor, ModelError, NamedExpr, SipInstance, DEFAULT_LEVELS,
    DEFAULT_RESOLUTION, DEFAULT_TRUNCATION,
};

pub fn load_instance(path: &Path) -> Result<SipInstance, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_instance(&text)
}

#[derive(Debug)]
enum Section {
    None,
    Problem,
    Index(String),
    Constraints,
    Equalities,
    Solver,
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn perr(line: usize, message: impl Into<String>) -> ModelError {
    ModelError::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_instance(text: &str) -> Result<SipInstance, ModelError> {
    let mut section = Section::None;
    let mut problem: Vec<Entry> = Vec::new();
    let mut indices: BTreeMap<String, (usize, Vec<Entry>)> = BTreeMap::new();
    let mut constraints: Vec<Entry> = Vec::new();
    let mut equalities: Vec<Entry> = Vec::new();
    let mut solver: Vec<Entry> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(inner) = content.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| perr(line, "unterminated section header"))?
                .trim();
            let mut words = inner.split_whitespace();
            section = match (words.next(), words.next(), words.next()) {
                (Some("problem"), None, _) => Section::Problem,
                (Some("constraints"), None, _) => Section::Constraints,
                (Some("equalities"), None, _) => Section::Equalities,
                (Some("solver"), None, _) => Section::Solver,
                (Some("index"), Some(name), None) => {
                    if indices.contains_key(name) {
                        return Err(perr(line, format!("index `{name}` declared twice")));
                    }
                    indices.insert(name.to_string(), (line, Vec::new()));
                    Section::Index(name.to_string())
                }
                _ => return Err(perr(line, format!("unknown section `[{inner}]`"))),
            };
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| perr(line, "expected `key = value`"))?;
        let entry = Entry {
            line,
            key: key.trim().to_string(),
            value: value.trim().to_string(),
        };
        if entry.key.is_empty() {
            return Err(perr(line, "empty key"));
        }
        match &section {
            Section::None => return Err(perr(line, "entry outside of any section")),
            Section::Problem => problem.push(entry),
            Section::Index(name) => indices.get_mut(name).unwrap().1.push(entry),
            Section::Constraints => constraints.push(entry),
            Section::Equalities => equalities.push(entry),
            Section::Solver => solver.push(entry),
        }
    }

    let mut vars: Option<Vec<String>> = None;
    let mut cost_src: Option<(usize, String, bool)> = None;
    let mut convex = false;
    let mut bounds_src: Option<(usize, String)> = None;
    for e in &problem {
        match e.key.as_str() {
            "vars" => vars = Some(e.value.split_whitespace().map(str::to_string).collect()),
            "minimize" | "minimize_max" => {
                if cost_src.is_some() {
                    return Err(perr(e.line, "cost given twice"));
                }
                cost_src = Some((e.line, e.value.clone(), e.key == "minimize_max"));
            }
            "convex" => convex = parse_bool(e)?,
            "box" => bounds_src = Some((e.line, e.value.clone())),
            other => return Err(perr(e.line, format!("unknown key `{other}` in [problem]"))),
        }
    }
    let vars = vars.ok_or_else(|| perr(1, "[problem] must declare `vars`"))?;
    for v in &vars {
        let ok = v.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
            && v.chars().all(|c| c.is_alphanumeric() || c == '_');
        if !ok {
            return Err(perr(problem[0].line, format!("invalid variable name `{v}`")));
        }
    }
    let scope_plain = Scope::new(vars.clone(), vec![]);
    let expr_at = |line: usize, src: &str, scope: &Scope| -> Result<Expr, ModelError> {
        parse_in(src, scope).map_err(|source| ModelError::Expr { line, source })
    };

    let cost = match cost_src {
        None => Cost::Smooth(Expr::Const(0.0)),
        Some((line, src, false)) => Cost::Smooth(expr_at(line, &src, &scope_plain)?),
        Some((line, src, true)) => Cost::ConvexMax(
            src.split(';')
                .map(|p| expr_at(line, p.trim(), &scope_plain))
                .collect::<Result<_, _>>()?,
        ),
    };
    let bounds = match bounds_src {
        None => None,
        Some((line, src)) => {
            let mut out = Vec::new();
            for part in src.split(';') {
                let nums = parse_numbers(line, part)?;
                if nums.len() != 2 {
                    return Err(perr(line, "each box interval needs `lo hi`"));
                }
                out.push((nums[0], nums[1]));
            }
            Some(out)
        }
    };

    let mut descriptors: BTreeMap<String, IndexSetDescriptor> = BTreeMap::new();
    for (name, (line, entries)) in &indices {
        descriptors.insert(name.clone(), descriptor(*line, entries, vars.len())?);
    }

    let mut fixed = Vec::new();
    let mut families = Vec::new();
    for e in &constraints {
        match e.key.split_once('(') {
            None => {
                check_name(e.line, &e.key)?;
                fixed.push(NamedExpr {
                    name: e.key.clone(),
                    body: expr_at(e.line, &e.value, &scope_plain)?,
                });
            }
            Some((name, rest)) => {
                let name = name.trim();
                check_name(e.line, name)?;
                let idx = rest
                    .strip_suffix(')')
                    .ok_or_else(|| perr(e.line, "expected `name(index)`"))?
                    .trim();
                let set = descriptors
                    .get(idx)
                    .ok_or_else(|| perr(e.line, format!("index `{idx}` has no [index {idx}] section")))?
                    .clone();
                let scope = Scope::new(vars.clone(), vec![idx.to_string()]);
                families.push(ConstraintFamily {
                    name: name.to_string(),
                    index: idx.to_string(),
                    body: expr_at(e.line, &e.value, &scope)?,
                    set,
                });
            }
        }
    }

    let mut eq = EqualityBlock::default();
    let mut affine_flag = None;
    for e in &equalities {
        if e.key == "affine" {
            affine_flag = Some(parse_bool(e)?);
            continue;
        }
        check_name(e.line, &e.key)?;
        eq.components.push(NamedExpr {
            name: e.key.clone(),
            body: expr_at(e.line, &e.value, &scope_plain)?,
        });
    }
    let detected = eq.components.iter().all(|h| h.body.degree() <= Degree::Affine);
    eq.affine = affine_flag.unwrap_or(detected);

    let inst = SipInstance {
        vars,
        cost,
        fixed,
        families,
        equalities: eq,
        convex,
        bounds,
        solver_options: solver.into_iter().map(|e| (e.key, e.value)).collect(),
    };
    inst.validate()?;
    Ok(inst)
}

fn check_name(line: usize, name: &str) -> Result<(), ModelError> {
    let ok = name.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_alphanumeric() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(perr(line, format!("invalid constraint name `{name}`")))
    }
}

fn parse_bool(e: &Entry) -> Result<bool, ModelError> {
    match e.value.as_str() {
        "true" | "yes" => Ok(true),
        "false" | "no" => Ok(false),
        other => Err(perr(e.line, format!("`{}` expects true or false, got `{other}`", e.key))),
    }
}

fn parse_number(line: usize, s: &str) -> Result<f64, ModelError> {
    match s {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| perr(line, format!("malformed number `{s}`"))),
    }
}

fn parse_numbers(line: usize, s: &str) -> Result<Vec<f64>, ModelError> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|w| !w.is_empty())
        .map(|w| parse_number(line, w))
        .collect()
}

fn parse_count(e: &Entry) -> Result<u64, ModelError> {
    e.value
        .parse::<u64>()
        .or_else(|_| {
            // allow 1e4 style
            e.value
                .parse::<f64>()
                .ok()
                .filter(|v| *v >= 0.0 && v.fract() == 0.0 && *v < 9e15)
                .map(|v| v as u64)
                .ok_or(())
        })
        .map_err(|_| perr(e.line, format!("`{}` expects a nonnegative integer", e.key)))
}

fn descriptor(line: usize, entries: &[Entry], n: usize) -> Result<IndexSetDescriptor, ModelError> {
    let kind = entries
        .iter()
        .find(|e| e.key == "kind")
        .map(|e| e.value.as_str())
        .ok_or_else(|| perr(line, "index section needs `kind`"))?;
    let allowed: &[&str] = match kind {
        "finite" => &["kind", "values"],
        "interval" => &[
            "kind",
            "lower",
            "upper",
            "include_lower",
            "include_upper",
            "resolution",
            "levels",
        ],
        "countable" => &["kind", "start", "truncation", "limit_ray"],
        other => return Err(perr(line, format!("unknown index kind `{other}`"))),
    };
    if let Some(e) = entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
        return Err(perr(e.line, format!("key `{}` does not apply to {kind} index sets", e.key)));
    }
    let get = |k: &str| entries.iter().rev().find(|e| e.key == k);
    let d = match kind {
        "finite" => {
            let e = get("values").ok_or_else(|| perr(line, "finite index set needs `values`"))?;
            let mut values = Vec::new();
            for w in e.value.split(|c: char| c.is_whitespace() || c == ',').filter(|w| !w.is_empty()) {
                let (label, num) = match w.split_once(':') {
                    Some((l, v)) => (l.to_string(), v),
                    None => (w.to_string(), w),
                };
                values.push((label, parse_number(e.line, num)?));
            }
            IndexSetDescriptor::Finite { values }
        }
        "interval" => {
            let num = |k: &str| -> Result<f64, ModelError> {
                let e = get(k).ok_or_else(|| perr(line, format!("interval index set needs `{k}`")))?;
                parse_number(e.line, &e.value)
            };
            let flag = |k: &str| get(k).map_or(Ok(true), parse_bool);
            IndexSetDescriptor::Interval {
                lower: num("lower")?,
                upper: num("upper")?,
                include_lower: flag("include_lower")?,
                include_upper: flag("include_upper")?,
                resolution: get("resolution").map_or(Ok(DEFAULT_RESOLUTION as u64), parse_count)? as usize,
                levels: get("levels").map_or(Ok(DEFAULT_LEVELS as u64), parse_count)? as usize,
            }
        }
        _ => {
            let mut limit_rays = Vec::new();
            for e in entries.iter().filter(|e| e.key == "limit_ray") {
                for part in e.value.split(';') {
                    let ray = parse_numbers(e.line, part)?;
                    if ray.len() != n {
                        return Err(perr(e.line, format!("limit ray needs {n} components")));
                    }
                    limit_rays.push(ray);
                }
            }
            IndexSetDescriptor::Countable {
                start: get("start").map_or(Ok(1), parse_count)?,
                truncation: get("truncation").map_or(Ok(DEFAULT_TRUNCATION), parse_count)?,
                limit_rays,
            }
        }
    };
    d.validate(n).map_err(|m| perr(line, m))?;
    Ok(d)
}
