//! Stencil manifests: which configurations to build and how to describe each
//! one to the stencil sources.
//!
//! A manifest is TOML with one `[[stencil]]` table per generator entry:
//!
//! ```toml
//! [[stencil]]
//! kind = "binary"
//! ops = ["add", "sub"]
//! types = ["i32", "i64"]
//! locs = [["reg", "stack", "lit"], ["reg", "stack", "lit"]]
//! pass_through = [0, 3]
//! spill = [false, true]
//! must_elide = true
//! exclude = [{ locs = ["lit", "lit"] }]
//! ```
//!
//! Omitted domains default to every operator, every location the kind
//! allows, pass-through 0 only and no spill. Combinations that do not form a
//! valid key (an operator undefined on a type, too many register slots) are
//! skipped silently; `exclude` removes the rest of what is unwanted.

use std::collections::BTreeSet;

use serde::Deserialize;

use crate::lang::{BinOp, CmpOp, ValueType};
use crate::stencil::layout::{value_holes, HoleRole};
use crate::stencil::{Loc, NodeKind, StencilKey};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ManifestError {
    #[error("manifest syntax: {0}")]
    Syntax(String),
    #[error("entry {entry}: {detail}")]
    Invalid { entry: usize, detail: String },
    #[error("entry {entry} ({kind}) expands to no stencils")]
    EmptyExpansion { entry: usize, kind: String },
    #[error("manifest has no entries")]
    Empty,
    #[error("{key} is produced by entries {first} and {second}")]
    DuplicateKey { key: StencilKey, first: usize, second: usize },
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, rename = "stencil")]
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub kind: String,
    pub ops: Option<Vec<String>>,
    #[serde(default)]
    pub types: Vec<String>,
    pub locs: Option<Vec<Vec<String>>>,
    /// Inclusive range.
    pub pass_through: Option<[u8; 2]>,
    pub spill: Option<Vec<bool>>,
    #[serde(default)]
    pub must_elide: bool,
    /// Source file under the stencil source root; `<kind>.c` by default.
    pub source: Option<String>,
    #[serde(default)]
    pub exclude: Vec<Exclude>,
}

/// Removes every configuration matching all of the given constraints.
#[derive(Debug, Clone, Default, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct Exclude {
    pub ops: Option<Vec<String>>,
    pub types: Option<Vec<String>>,
    /// One pattern per operand; `"*"` matches any location.
    pub locs: Option<Vec<String>>,
    pub pass_through: Option<Vec<u8>>,
    pub spill: Option<bool>,
}

/// One configuration to compile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub key: StencilKey,
    pub source: String,
    pub must_elide: bool,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, ManifestError> {
        toml::from_str(text).map_err(|e| ManifestError::Syntax(e.to_string()))
    }

    /// One single-key entry per distinct key, for building just the
    /// stencils some set of programs selects.
    pub fn for_keys<'a>(keys: impl IntoIterator<Item = &'a StencilKey>) -> Manifest {
        let keys: BTreeSet<StencilKey> = keys.into_iter().copied().collect();
        let entries = keys
            .into_iter()
            .map(|k| Entry {
                kind: k.kind.base_name().to_string(),
                ops: k.kind.op_name().map(|o| vec![o.to_string()]),
                types: k.ty.map(|t| vec![t.name().to_string()]).unwrap_or_default(),
                locs: Some(k.operands().iter().map(|l| vec![l.name().to_string()]).collect()),
                pass_through: Some([k.pass_through; 2]),
                spill: Some(vec![k.spill]),
                ..Entry::default()
            })
            .collect();
        Manifest { entries }
    }
}

fn kinds_of(entry: usize, e: &Entry) -> Result<Vec<NodeKind>, ManifestError> {
    let invalid = |detail: String| ManifestError::Invalid { entry, detail };
    let has_op = match e.kind.as_str() {
        "binary" | "binary_var_const" => Some(BinOp::ALL.map(BinOp::name).to_vec()),
        "compare" | "if_cmp_var_const" => Some(CmpOp::ALL.map(CmpOp::name).to_vec()),
        _ => None,
    };
    match (has_op, &e.ops) {
        (None, None) => NodeKind::from_names(&e.kind, None)
            .map(|k| vec![k])
            .ok_or_else(|| invalid(format!("unknown kind `{}`", e.kind))),
        (None, Some(_)) => Err(invalid(format!("`{}` takes no operators", e.kind))),
        (Some(all), ops) => {
            let names: Vec<&str> = match ops {
                Some(v) => v.iter().map(String::as_str).collect(),
                None => all,
            };
            names
                .iter()
                .map(|o| {
                    NodeKind::from_names(&e.kind, Some(o))
                        .ok_or_else(|| invalid(format!("unknown operator `{o}` for `{}`", e.kind)))
                })
                .collect()
        }
    }
}

fn parse_type(entry: usize, s: &str) -> Result<ValueType, ManifestError> {
    ValueType::from_name(s).ok_or_else(|| ManifestError::Invalid { entry, detail: format!("unknown type `{s}`") })
}

fn parse_loc(entry: usize, s: &str) -> Result<Loc, ManifestError> {
    Loc::from_name(s).ok_or_else(|| ManifestError::Invalid { entry, detail: format!("unknown location `{s}`") })
}

impl Exclude {
    fn matches(&self, key: &StencilKey) -> bool {
        let op_ok = self.ops.as_ref().is_none_or(|v| key.kind.op_name().is_some_and(|o| v.iter().any(|x| x == o)));
        let ty_ok = self.types.as_ref().is_none_or(|v| key.ty.is_some_and(|t| v.iter().any(|x| x == t.name())));
        let loc_ok = self.locs.as_ref().is_none_or(|pat| {
            pat.len() == key.operands().len() && pat.iter().zip(key.operands()).all(|(p, l)| p == "*" || p == l.name())
        });
        let pt_ok = self.pass_through.as_ref().is_none_or(|v| v.contains(&key.pass_through));
        let spill_ok = self.spill.is_none_or(|s| s == key.spill);
        op_ok && ty_ok && loc_ok && pt_ok && spill_ok
    }
}

/// Every valid configuration of one entry, before deduplication.
fn expand_entry(entry: usize, e: &Entry) -> Result<Vec<StencilKey>, ManifestError> {
    let invalid = |detail: String| ManifestError::Invalid { entry, detail };
    let kinds = kinds_of(entry, e)?;
    let types: Vec<Option<ValueType>> = if e.types.is_empty() {
        vec![None]
    } else {
        e.types.iter().map(|t| parse_type(entry, t).map(Some)).collect::<Result<_, _>>()?
    };
    let [lo, hi] = e.pass_through.unwrap_or([0, 0]);
    if lo > hi {
        return Err(invalid(format!("empty pass-through range {lo}..={hi}")));
    }
    let spills = e.spill.clone().unwrap_or_else(|| vec![false]);
    for x in &e.exclude {
        for l in x.locs.iter().flatten().filter(|l| *l != "*") {
            parse_loc(entry, l)?;
        }
        for t in x.types.iter().flatten() {
            parse_type(entry, t)?;
        }
    }

    let mut out = Vec::new();
    for kind in kinds {
        let arity = kind.arity();
        let domains: Vec<Vec<Loc>> = match &e.locs {
            Some(d) if d.len() != arity => {
                return Err(invalid(format!("`{}` has {arity} operands, {} location sets given", e.kind, d.len())))
            }
            Some(d) => d.iter().map(|s| s.iter().map(|l| parse_loc(entry, l)).collect()).collect::<Result<_, _>>()?,
            None => (0..arity).map(|i| kind.allowed_locs(i).to_vec()).collect(),
        };
        for &ty in &types {
            for locs in cartesian(&domains) {
                for pt in lo..=hi {
                    for &spill in &spills {
                        let key = StencilKey::new(kind, ty, &locs, pt, spill);
                        if key.validate().is_ok() && !e.exclude.iter().any(|x| x.matches(&key)) {
                            out.push(key);
                        }
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(ManifestError::EmptyExpansion { entry, kind: e.kind.clone() });
    }
    Ok(out)
}

fn cartesian(domains: &[Vec<Loc>]) -> Vec<Vec<Loc>> {
    domains.iter().fold(vec![Vec::new()], |acc, d| {
        acc.iter()
            .flat_map(|prefix| {
                d.iter().map(move |&l| {
                    let mut v = prefix.clone();
                    v.push(l);
                    v
                })
            })
            .collect()
    })
}

/// Expands the manifest into jobs sorted by key.
pub fn expand(manifest: &Manifest) -> Result<Vec<Job>, ManifestError> {
    if manifest.entries.is_empty() {
        return Err(ManifestError::Empty);
    }
    let mut origin = std::collections::BTreeMap::new();
    let mut jobs = Vec::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        let source = e.source.clone().unwrap_or_else(|| format!("{}.c", e.kind));
        let mut seen = BTreeSet::new();
        for key in expand_entry(i, e)? {
            if !seen.insert(key) {
                continue;
            }
            if let Some(&first) = origin.get(&key) {
                return Err(ManifestError::DuplicateKey { key, first, second: i });
            }
            origin.insert(key, i);
            jobs.push(Job { key, source: source.clone(), must_elide: e.must_elide });
        }
    }
    jobs.sort_by_key(|j| j.key);
    Ok(jobs)
}

fn role_macro(role: HoleRole) -> String {
    match role {
        HoleRole::OperandOffset(i) | HoleRole::OperandLiteral(i) => format!("CP_V_OP{i}"),
        HoleRole::Dest => "CP_V_DEST".into(),
        HoleRole::FrameDelta => "CP_V_DELTA".into(),
        HoleRole::Need => "CP_V_NEED".into(),
        HoleRole::PoolLimit => "CP_V_LIMIT".into(),
        HoleRole::Adapter => "CP_V_ADAPTER".into(),
        HoleRole::PoolBase => "CP_V_POOL".into(),
        HoleRole::Spill => "CP_V_SPILL".into(),
    }
}

/// Preprocessor definitions describing `key` to the stencil sources.
///
/// `CP_KIND`, `CP_OP`, `CP_TYPE` (255 when untyped) and `CP_LOC<i>` carry the
/// numeric tags of the canonical key encoding; `CP_NOPS`, `CP_PT` and
/// `CP_SPILL` the counts and flag; `CP_SYMBOL` the function name; and
/// `CP_V_<ROLE>` the value-hole ordinal of every hole the key has.
pub fn defines(key: &StencilKey) -> Vec<(String, String)> {
    let mut d = vec![
        ("CP_KIND".to_string(), key.kind.tag().to_string()),
        ("CP_OP".into(), key.kind.op_tag().to_string()),
        ("CP_TYPE".into(), key.ty.map_or(255, |t| t as u8).to_string()),
        ("CP_NOPS".into(), key.operands().len().to_string()),
    ];
    for (i, l) in key.operands().iter().enumerate() {
        d.push((format!("CP_LOC{i}"), l.tag().to_string()));
    }
    d.push(("CP_PT".into(), key.pass_through.to_string()));
    d.push(("CP_SPILL".into(), (key.spill as u8).to_string()));
    d.push(("CP_SYMBOL".into(), key.symbol()));
    for (n, h) in value_holes(key).iter().enumerate() {
        d.push((role_macro(h.role), n.to_string()));
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    const BINARY: &str = r#"
        [[stencil]]
        kind = "binary"
        ops = ["add"]
        types = ["i32", "i64"]
        locs = [["reg", "stack", "lit"], ["reg", "stack", "lit"]]
        pass_through = [0, 3]
        spill = [false, true]
        exclude = [{ locs = ["lit", "lit"] }]
    "#;

    #[test]
    fn binary_entry_matches_enumerate_and_count() {
        let jobs = expand(&Manifest::parse(BINARY).unwrap()).unwrap();
        // Independent count: every (type, loc pair, pt, spill) tuple except
        // the literal/literal pairs.
        let mut n = 0;
        for _ty in 0..2 {
            for a in 0..3 {
                for b in 0..3 {
                    if a == 2 && b == 2 {
                        continue;
                    }
                    n += 4 * 2;
                }
            }
        }
        assert_eq!(jobs.len(), n);
        assert_eq!(jobs.len(), 128);
        assert!(jobs.windows(2).all(|w| w[0].key < w[1].key));
        assert!(jobs.iter().all(|j| j.source == "binary.c"));
    }

    #[test]
    fn filters_that_remove_everything_are_errors() {
        let m = Manifest::parse("[[stencil]]\nkind = \"binary\"\nops = [\"div\"]\ntypes = [\"f64\"]\n").unwrap();
        assert!(matches!(expand(&m), Err(ManifestError::EmptyExpansion { entry: 0, .. })));
        assert_eq!(expand(&Manifest::default()), Err(ManifestError::Empty));
    }

    #[test]
    fn degenerate_pass_through_range() {
        let m = Manifest::parse("[[stencil]]\nkind = \"literal\"\ntypes = [\"i64\"]\npass_through = [0, 0]\n").unwrap();
        let jobs = expand(&m).unwrap();
        assert_eq!(jobs.len(), 1);
        assert_eq!(jobs[0].key.pass_through, 0);
    }

    #[test]
    fn overlapping_entries_are_rejected() {
        let text = "[[stencil]]\nkind = \"jump\"\n[[stencil]]\nkind = \"jump\"\n";
        assert!(matches!(expand(&Manifest::parse(text).unwrap()), Err(ManifestError::DuplicateKey { .. })));
    }

    #[test]
    fn unknown_names_are_reported() {
        for text in [
            "[[stencil]]\nkind = \"bogus\"\n",
            "[[stencil]]\nkind = \"binary\"\nops = [\"pow\"]\ntypes = [\"i64\"]\n",
            "[[stencil]]\nkind = \"jump\"\nops = [\"add\"]\n",
            "[[stencil]]\nkind = \"literal\"\ntypes = [\"u8\"]\n",
        ] {
            assert!(matches!(expand(&Manifest::parse(text).unwrap()), Err(ManifestError::Invalid { .. })), "{text}");
        }
        assert!(matches!(Manifest::parse("[[stencil]]\nkinds = 1\n"), Err(ManifestError::Syntax(_))));
    }

    #[test]
    fn key_manifests_expand_to_exactly_their_keys() {
        let keys = crate::stencil::synthetic::all_valid_keys(2);
        let sample: Vec<StencilKey> = keys.iter().step_by(7).copied().collect();
        let mut twice = sample.clone();
        twice.extend_from_slice(&sample[..10]);
        let jobs = expand(&Manifest::for_keys(&twice)).unwrap();
        let mut want = sample;
        want.sort();
        assert_eq!(jobs.iter().map(|j| j.key).collect::<Vec<_>>(), want);
    }

    #[test]
    fn defines_describe_the_key() {
        let key = StencilKey::new(NodeKind::Call, None, &[], 0, true);
        let d: std::collections::HashMap<_, _> = defines(&key).into_iter().collect();
        assert_eq!(d["CP_TYPE"], "255");
        assert_eq!(d["CP_NOPS"], "0");
        assert_eq!(d["CP_SPILL"], "1");
        assert_eq!(d["CP_V_DELTA"], "0");
        assert_eq!(d["CP_V_NEED"], "1");
        assert_eq!(d["CP_V_LIMIT"], "2");
        assert_eq!(d["CP_V_SPILL"], "3");
        assert_eq!(d["CP_SYMBOL"], key.symbol());
        let key =
            StencilKey::new(NodeKind::Binary(BinOp::Add), Some(ValueType::I32), &[Loc::Stack, Loc::Lit], 1, false);
        let d: std::collections::HashMap<_, _> = defines(&key).into_iter().collect();
        assert_eq!((d["CP_LOC0"].as_str(), d["CP_LOC1"].as_str()), ("1", "2"));
        assert_eq!((d["CP_V_OP0"].as_str(), d["CP_V_OP1"].as_str()), ("0", "1"));
    }
}
