//! Graph manifests.
//!
//! A manifest is UTF-8 text made of bracketed section headers and
//! `key = value` lines. Lines starting with `#` and blank lines are ignored;
//! surrounding whitespace is trimmed. Paths are relative to the manifest's
//! directory.
//!
//! ```text
//! [types]                      one line per object type, in id order
//! <name> = <cardinality>
//!
//! [roles]                      optional; without it the graph is unstructured
//! bag = <type>
//! instance = <type>
//! label = <type>
//! target = <type> <type>       the relation to predict
//! strict_membership = false    optional: every instance in exactly one bag
//!
//! [relation <source> <target>] one section per R_ij
//! file = <path>
//! format = dense|sparse        optional; must match the file header
//! mask = <path>                optional 0/1 file of observed entries
//!
//! [view <type> <index>]        one section per Θ, index counted from 0
//! file = <path>
//! format = dense|sparse        optional
//! ```
//!
//! Type names may not contain whitespace.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{FusionGraph, InterRelation, IntraView, ObjectType, Roles};
use crate::io::matrix::{read_mask, read_matrix, write_text, format_mask, format_matrix, MatrixFormat, ValueDomain};
use crate::linalg::{Block, Mask};
use crate::scalar::Scalar;

/// One file referenced by a manifest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileRef {
    pub path: PathBuf,
    pub format: Option<MatrixFormat>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationEntry {
    pub source: usize,
    pub target: usize,
    pub file: FileRef,
    pub mask: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewEntry {
    pub type_id: usize,
    pub view: usize,
    pub file: FileRef,
}

/// Parsed manifest; paths are already resolved against the manifest directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphManifest {
    pub types: Vec<ObjectType>,
    pub roles: Option<Roles>,
    pub strict_membership: bool,
    pub relations: Vec<RelationEntry>,
    pub views: Vec<ViewEntry>,
}

enum Section {
    None,
    Types,
    Roles,
    Relation(usize),
    View(usize),
}

#[derive(Default)]
struct PartialRoles {
    bag: Option<usize>,
    instance: Option<usize>,
    label: Option<usize>,
    target: Option<(usize, usize)>,
    strict: bool,
}

struct Parser<'a> {
    path: &'a str,
    base: &'a Path,
    types: Vec<ObjectType>,
    roles: Option<PartialRoles>,
    relations: Vec<(usize, usize, Option<FileRef>, Option<PathBuf>, usize)>,
    views: Vec<(usize, usize, Option<FileRef>, usize)>,
}

impl Parser<'_> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line,
            msg: msg.into(),
        }
    }

    fn type_id(&self, name: &str, line: usize) -> Result<usize> {
        self.types
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| self.err(line, format!("unknown type '{name}' (declare it under [types] first)")))
    }

    fn pair(&self, value: &str, line: usize) -> Result<(usize, usize)> {
        let toks: Vec<&str> = value.split_whitespace().collect();
        let [a, b] = toks[..] else {
            return Err(self.err(line, format!("expected two type names, found '{value}'")));
        };
        Ok((self.type_id(a, line)?, self.type_id(b, line)?))
    }

    fn header(&mut self, inner: &str, line: usize) -> Result<Section> {
        let toks: Vec<&str> = inner.split_whitespace().collect();
        match toks[..] {
            ["types"] => Ok(Section::Types),
            ["roles"] => {
                self.roles.get_or_insert_with(PartialRoles::default);
                Ok(Section::Roles)
            }
            ["relation", a, b] => {
                let (s, t) = (self.type_id(a, line)?, self.type_id(b, line)?);
                self.relations.push((s, t, None, None, line));
                Ok(Section::Relation(self.relations.len() - 1))
            }
            ["view", a, idx] => {
                let p = self.type_id(a, line)?;
                let t: usize = idx
                    .parse()
                    .map_err(|_| self.err(line, format!("invalid view index '{idx}'")))?;
                self.views.push((p, t, None, line));
                Ok(Section::View(self.views.len() - 1))
            }
            _ => Err(self.err(line, format!("unknown section [{inner}]"))),
        }
    }

    fn file_key(&self, slot: &mut Option<FileRef>, key: &str, value: &str, line: usize) -> Result<bool> {
        match key {
            "file" => {
                let format = slot.as_ref().and_then(|f| f.format);
                *slot = Some(FileRef {
                    path: self.base.join(value),
                    format,
                });
            }
            "format" => {
                let format = value.parse().map_err(|e: Error| self.err(line, e.to_string()))?;
                match slot {
                    Some(f) => f.format = Some(format),
                    None => {
                        *slot = Some(FileRef {
                            path: PathBuf::new(),
                            format: Some(format),
                        })
                    }
                }
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn role_entry(&self, roles: &mut PartialRoles, key: &str, value: &str, line: usize) -> Result<()> {
        match key {
            "bag" => roles.bag = Some(self.type_id(value, line)?),
            "instance" => roles.instance = Some(self.type_id(value, line)?),
            "label" => roles.label = Some(self.type_id(value, line)?),
            "target" => roles.target = Some(self.pair(value, line)?),
            "strict_membership" => {
                roles.strict = value
                    .parse()
                    .map_err(|_| self.err(line, format!("expected true or false, found '{value}'")))?
            }
            _ => return Err(self.err(line, format!("unknown role key '{key}'"))),
        }
        Ok(())
    }

    fn entry(&mut self, section: &Section, key: &str, value: &str, line: usize) -> Result<()> {
        match *section {
            Section::None => Err(self.err(line, "key outside of any section")),
            Section::Types => {
                if key.split_whitespace().count() != 1 {
                    return Err(self.err(line, format!("type name '{key}' contains whitespace")));
                }
                if self.types.iter().any(|t| t.name == key) {
                    return Err(self.err(line, format!("type '{key}' declared twice")));
                }
                let n: usize = value
                    .parse()
                    .map_err(|_| self.err(line, format!("invalid cardinality '{value}'")))?;
                self.types.push(ObjectType::new(key, n));
                Ok(())
            }
            Section::Roles => {
                let mut roles = self.roles.take().unwrap_or_default();
                let result = self.role_entry(&mut roles, key, value, line);
                self.roles = Some(roles);
                result
            }
            Section::Relation(idx) => {
                let mut slot = self.relations[idx].2.take();
                let known = self.file_key(&mut slot, key, value, line)?;
                self.relations[idx].2 = slot;
                if known {
                    return Ok(());
                }
                if key == "mask" {
                    self.relations[idx].3 = Some(self.base.join(value));
                    Ok(())
                } else {
                    Err(self.err(line, format!("unknown relation key '{key}'")))
                }
            }
            Section::View(idx) => {
                let mut slot = self.views[idx].2.take();
                let known = self.file_key(&mut slot, key, value, line)?;
                self.views[idx].2 = slot;
                if known {
                    Ok(())
                } else {
                    Err(self.err(line, format!("unknown view key '{key}'")))
                }
            }
        }
    }
}

/// Parses manifest text; relative paths resolve against `base`.
pub fn parse_manifest(text: &str, path: &str, base: &Path) -> Result<GraphManifest> {
    let mut p = Parser {
        path,
        base,
        types: Vec::new(),
        roles: None,
        relations: Vec::new(),
        views: Vec::new(),
    };
    let mut section = Section::None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(inner) = l.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| p.err(line, "unterminated section header"))?;
            section = p.header(inner.trim(), line)?;
            continue;
        }
        let (key, value) = l
            .split_once('=')
            .ok_or_else(|| p.err(line, format!("expected 'key = value', found '{l}'")))?;
        p.entry(&section, key.trim(), value.trim(), line)?;
    }

    let end = text.lines().count().max(1);
    let missing = |what: &str| p.err(end, format!("missing role '{what}' in [roles]"));
    let roles = match &p.roles {
        None => None,
        Some(r) => Some(Roles {
            bag: r.bag.ok_or_else(|| missing("bag"))?,
            instance: r.instance.ok_or_else(|| missing("instance"))?,
            label: r.label.ok_or_else(|| missing("label"))?,
            target: r.target.ok_or_else(|| missing("target"))?,
        }),
    };
    let strict = p.roles.as_ref().is_some_and(|r| r.strict);
    let relations = p
        .relations
        .iter()
        .map(|(s, t, file, mask, line)| match file {
            Some(f) if !f.path.as_os_str().is_empty() => Ok(RelationEntry {
                source: *s,
                target: *t,
                file: f.clone(),
                mask: mask.clone(),
            }),
            _ => Err(p.err(*line, "relation section without 'file'")),
        })
        .collect::<Result<Vec<_>>>()?;
    let views = p
        .views
        .iter()
        .map(|(ty, v, file, line)| match file {
            Some(f) if !f.path.as_os_str().is_empty() => Ok(ViewEntry {
                type_id: *ty,
                view: *v,
                file: f.clone(),
            }),
            _ => Err(p.err(*line, "view section without 'file'")),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GraphManifest {
        types: p.types,
        roles,
        strict_membership: strict,
        relations,
        views,
    })
}

pub fn read_manifest(path: &Path) -> Result<GraphManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, &path.display().to_string(), base)
}

fn load_block<T: Scalar>(file: &FileRef, domain: ValueDomain) -> Result<Block<T>> {
    let parsed = read_matrix(&file.path, domain)?;
    if let Some(expected) = file.format {
        if expected != parsed.format {
            return Err(Error::Format(format!(
                "{}: manifest declares {} but the file header says {}",
                file.path.display(),
                expected.name(),
                parsed.format.name()
            )));
        }
    }
    Ok(parsed.block)
}

/// Loads and validates the graph described by a manifest. Files are read in
/// parallel.
pub fn load_graph<T: Scalar>(manifest_path: &Path) -> Result<FusionGraph<T>> {
    let manifest = read_manifest(manifest_path)?;
    let relations = manifest
        .relations
        .par_iter()
        .map(|entry| {
            let block = load_block(&entry.file, ValueDomain::Nonnegative)?;
            let mut rel = InterRelation::new(entry.source, entry.target, block);
            if let Some(mask_path) = &entry.mask {
                let mask: Mask = read_mask(mask_path)?;
                rel = rel.with_mask(mask);
            }
            Ok(rel)
        })
        .collect::<Result<Vec<_>>>()?;
    let views = manifest
        .views
        .par_iter()
        .map(|entry| Ok(IntraView::new(entry.type_id, entry.view, load_block(&entry.file, ValueDomain::Signed)?)))
        .collect::<Result<Vec<_>>>()?;
    let graph = match manifest.roles {
        Some(roles) => FusionGraph::new(manifest.types, relations, views, roles),
        None => FusionGraph::unstructured(manifest.types, relations, views),
    }
    .with_strict_membership(manifest.strict_membership);
    graph.ensure_valid()?;
    Ok(graph)
}

/// Writes `graph` as a manifest plus one file per block in the manifest's
/// directory. Sparse blocks are written in sparse form. Returns every path
/// written, manifest first.
pub fn save_graph<T: Scalar>(graph: &FusionGraph<T>, manifest_path: &Path) -> Result<Vec<PathBuf>> {
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = |id: usize| graph.types()[id].name.as_str();
    if let Some(t) = graph.types().iter().find(|t| t.name.is_empty() || t.name.contains(char::is_whitespace)) {
        return Err(Error::Format(format!("type name '{}' cannot be written to a manifest", t.name)));
    }
    let mut written = vec![manifest_path.to_path_buf()];
    let mut text = String::from("[types]\n");
    for t in graph.types() {
        let _ = writeln!(text, "{} = {}", t.name, t.cardinality);
    }
    if let Some(roles) = graph.roles() {
        let _ = write!(
            text,
            "\n[roles]\nbag = {}\ninstance = {}\nlabel = {}\ntarget = {} {}\n",
            name(roles.bag),
            name(roles.instance),
            name(roles.label),
            name(roles.target.0),
            name(roles.target.1)
        );
        if graph.strict_membership() {
            text.push_str("strict_membership = true\n");
        }
    }
    for rel in graph.relations() {
        let format = if rel.matrix.is_sparse() { MatrixFormat::Sparse } else { MatrixFormat::Dense };
        let file = format!("rel_{}_{}.txt", name(rel.source), name(rel.target));
        write_text(&dir.join(&file), &format_matrix(&rel.matrix, format))?;
        written.push(dir.join(&file));
        let _ = write!(
            text,
            "\n[relation {} {}]\nfile = {file}\nformat = {}\n",
            name(rel.source),
            name(rel.target),
            format.name()
        );
        if let Some(mask) = &rel.observed {
            let mask_file = format!("mask_{}_{}.txt", name(rel.source), name(rel.target));
            write_text(&dir.join(&mask_file), &format_mask(mask))?;
            written.push(dir.join(&mask_file));
            let _ = writeln!(text, "mask = {mask_file}");
        }
    }
    for view in graph.views() {
        let format = if view.matrix.is_sparse() { MatrixFormat::Sparse } else { MatrixFormat::Dense };
        let file = format!("view_{}_{}.txt", name(view.type_id), view.view);
        write_text(&dir.join(&file), &format_matrix(&view.matrix, format))?;
        written.push(dir.join(&file));
        let _ = write!(
            text,
            "\n[view {} {}]\nfile = {file}\nformat = {}\n",
            name(view.type_id),
            view.view,
            format.name()
        );
    }
    write_text(manifest_path, &text)?;
    Ok(written)
}
