//! Attribute changed lines to code entities (declared structures) or
//! proximity blocks.
//!
//! Declared-structure detection uses lightweight, line-oriented recognizers
//! (signature pattern plus brace or indentation balance), not full parsers.
//! Coverage per language: C has top-level function definitions, Java has
//! method bodies inside type declarations, Python has column-0 `def` and `class`
//! blocks. Everything else degrades to a file-level fallback entity.

use serde::{Deserialize, Serialize};

use crate::identity::DevId;

/// Entity name used for the file-level fallback and out-of-span changes.
pub const FILE_FALLBACK_ENTITY: &str = "<file>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    C,
    Java,
    Python,
    Unsupported,
}

impl Language {
    pub fn from_path(path: &str) -> Language {
        let ext = path.rsplit('.').next().unwrap_or("");
        match ext {
            "c" | "h" => Language::C,
            "java" => Language::Java,
            "py" => Language::Python,
            _ => Language::Unsupported,
        }
    }

    pub fn is_supported(self) -> bool {
        self != Language::Unsupported
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Function,
    ClassLike,
    FileFallback,
}

/// A named, non-overlapping span of source lines (1-based, inclusive).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub kind: EntityKind,
    pub name: String,
    pub start_line: u32,
    pub end_line: u32,
}

/// How changed blocks are counted into records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingMode {
    /// One record per (commit, entity, developer); block counts collapse.
    SummarisePerEntity,
    /// One record per proximity block (split further at entity boundaries).
    DistinctBlocks,
}

impl CountingMode {
    pub fn label(self) -> &'static str {
        match self {
            CountingMode::SummarisePerEntity => "summarise_per_entity",
            CountingMode::DistinctBlocks => "distinct_blocks",
        }
    }
}

/// A change attributed to an entity (or proximity block within one).
#[derive(Debug, Clone, PartialEq)]
pub struct EntityChange {
    pub commit: String,
    pub path: String,
    pub entity_name: String,
    pub dev: DevId,
    pub lines_changed: u32,
    pub block_index: Option<u32>,
    pub counting_mode: CountingMode,
}

/// A maximal run of changed lines in local proximity: consecutive members
/// differ by at most gap+1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub start_line: u32,
    pub end_line: u32,
    pub line_count: u32,
}

/// Group sorted, distinct changed lines into proximity blocks.
pub fn detect_blocks_proximity(changed_lines: &[u32], gap: u32) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut iter = changed_lines.iter();
    let Some(&first) = iter.next() else {
        return blocks;
    };
    let mut start = first;
    let mut prev = first;
    let mut count = 1u32;
    for &line in iter {
        debug_assert!(line > prev, "changed lines must be sorted and distinct");
        if line - prev <= gap + 1 {
            count += 1;
        } else {
            blocks.push(Block {
                start_line: start,
                end_line: prev,
                line_count: count,
            });
            start = line;
            count = 1;
        }
        prev = line;
    }
    blocks.push(Block {
        start_line: start,
        end_line: prev,
        line_count: count,
    });
    blocks
}

/// Detect declared structures. Unsupported languages yield one file-level
/// fallback span covering the whole file.
pub fn detect_entities_declared(text: &str, language: Language) -> Vec<EntitySpan> {
    match language {
        Language::C => detect_braced(text, BraceDialect::C),
        Language::Java => detect_braced(text, BraceDialect::Java),
        Language::Python => detect_python(text),
        Language::Unsupported => {
            let lines = text.lines().count().max(1) as u32;
            vec![EntitySpan {
                kind: EntityKind::FileFallback,
                name: FILE_FALLBACK_ENTITY.to_string(),
                start_line: 1,
                end_line: lines,
            }]
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum BraceDialect {
    C,
    Java,
}

const C_CONTROL: &[&str] = &[
    "if", "else", "for", "while", "switch", "return", "sizeof", "do", "case", "typedef",
];
const JAVA_CONTROL: &[&str] = &[
    "if", "else", "for", "while", "switch", "return", "do", "case", "new", "catch", "try",
    "synchronized", "throw", "super", "this", "assert",
];

/// Blank out string/char literals and comments so brace counting sees code
/// only. Returns the scrubbed line and the updated block-comment state.
fn scrub_line(line: &str, mut in_block_comment: bool) -> (String, bool) {
    let chars: Vec<char> = line.chars().collect();
    let mut out = String::with_capacity(chars.len());
    let mut i = 0;
    let mut in_string: Option<char> = None;
    while i < chars.len() {
        let c = chars[i];
        if in_block_comment {
            if c == '*' && chars.get(i + 1) == Some(&'/') {
                in_block_comment = false;
                i += 2;
            } else {
                i += 1;
            }
            out.push(' ');
            continue;
        }
        if let Some(quote) = in_string {
            if c == '\\' {
                i += 2;
                out.push(' ');
                continue;
            }
            if c == quote {
                in_string = None;
            }
            out.push(' ');
            i += 1;
            continue;
        }
        match c {
            '"' | '\'' => {
                in_string = Some(c);
                out.push(' ');
            }
            '/' if chars.get(i + 1) == Some(&'/') => {
                // rest of line is a comment
                break;
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                in_block_comment = true;
                out.push(' ');
                i += 1;
            }
            _ => out.push(c),
        }
        i += 1;
    }
    (out, in_block_comment)
}

/// Candidate definition name on a scrubbed line: last identifier before the
/// first '(' that is not a control keyword, call-site or annotation.
fn signature_candidate(code: &str, dialect: BraceDialect) -> Option<String> {
    let paren = code.find('(')?;
    let before = &code[..paren];
    if before.contains('=') || before.trim_end().ends_with(['+', '-', '!', '&', '|', ',']) {
        return None;
    }
    let name: String = before
        .chars()
        .rev()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if name.is_empty() || name.chars().next().unwrap().is_ascii_digit() {
        return None;
    }
    let keywords = match dialect {
        BraceDialect::C => C_CONTROL,
        BraceDialect::Java => JAVA_CONTROL,
    };
    if keywords.contains(&name.as_str()) {
        return None;
    }
    let prefix = before[..before.len() - name.len()].trim_end();
    if prefix.ends_with('@') || prefix.ends_with('.') {
        return None;
    }
    if dialect == BraceDialect::Java {
        // type declarations carry no parameter list we should match on
        if prefix.split_whitespace().any(|w| {
            w == "class" || w == "interface" || w == "enum" || w == "record"
        }) {
            return None;
        }
    }
    Some(name)
}

fn detect_braced(text: &str, dialect: BraceDialect) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut depth: i32 = 0;
    let mut in_block_comment = false;
    // pending candidate signature: (name, start line)
    let mut pending: Option<(String, u32)> = None;
    // open span: (name, start line, depth before the opening brace)
    let mut open: Option<(String, u32, i32)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u32 + 1;
        let (code, next_state) = scrub_line(raw, in_block_comment);
        in_block_comment = next_state;

        if open.is_none() && pending.is_none() {
            let at_candidate_depth = match dialect {
                BraceDialect::C => depth == 0,
                BraceDialect::Java => depth >= 1,
            };
            if at_candidate_depth && !code.trim_start().starts_with('#') {
                if let Some(name) = signature_candidate(&code, dialect) {
                    pending = Some((name, line_no));
                }
            }
        }

        for c in code.chars() {
            match c {
                '{' => {
                    if open.is_none() {
                        if let Some((name, start)) = pending.take() {
                            open = Some((name, start, depth));
                        }
                    }
                    depth += 1;
                }
                '}' => {
                    depth -= 1;
                    if let Some((name, start, open_depth)) = &open {
                        if depth == *open_depth {
                            spans.push(EntitySpan {
                                kind: EntityKind::Function,
                                name: name.clone(),
                                start_line: *start,
                                end_line: line_no,
                            });
                            open = None;
                        }
                    }
                }
                ';' => {
                    // declaration without a body
                    if open.is_none() {
                        pending = None;
                    }
                }
                _ => {}
            }
        }
    }
    spans
}

fn detect_python(text: &str) -> Vec<EntitySpan> {
    let lines: Vec<&str> = text.lines().collect();
    let mut spans: Vec<EntitySpan> = Vec::new();
    let mut open: Option<(EntityKind, String, u32)> = None;
    let mut last_content_line = 0u32;

    for (idx, raw) in lines.iter().enumerate() {
        let line_no = idx as u32 + 1;
        let trimmed = raw.trim_end();
        if trimmed.trim_start().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let at_column_zero = !trimmed.starts_with(' ') && !trimmed.starts_with('\t');
        if at_column_zero {
            if let Some((kind, name, start)) = open.take() {
                spans.push(EntitySpan {
                    kind,
                    name,
                    start_line: start,
                    end_line: last_content_line,
                });
            }
            if let Some(name) = python_def_name(trimmed) {
                open = Some((name.0, name.1, line_no));
            }
        }
        last_content_line = line_no;
    }
    if let Some((kind, name, start)) = open {
        spans.push(EntitySpan {
            kind,
            name,
            start_line: start,
            end_line: last_content_line,
        });
    }
    spans
}

fn python_def_name(line: &str) -> Option<(EntityKind, String)> {
    let (kind, rest) = if let Some(rest) = line.strip_prefix("def ") {
        (EntityKind::Function, rest)
    } else if let Some(rest) = line.strip_prefix("async def ") {
        (EntityKind::Function, rest)
    } else if let Some(rest) = line.strip_prefix("class ") {
        (EntityKind::ClassLike, rest)
    } else {
        return None;
    };
    let name: String = rest
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect();
    if name.is_empty() {
        None
    } else {
        Some((kind, name))
    }
}

fn entity_for_line(line: u32, spans: &[EntitySpan]) -> Option<&EntitySpan> {
    spans
        .iter()
        .find(|s| s.start_line <= line && line <= s.end_line)
}

/// Map changed lines to entity-change records under the counting mode.
///
/// * `SummarisePerEntity`: one record per touched entity.
/// * `DistinctBlocks`: proximity blocks first, one record per block (blocks
///   straddling an entity boundary split per entity, keeping the block index).
///
/// Lines outside every span map to the file-fallback entity when `fallback`
/// is enabled and are dropped otherwise.
pub fn map_changes_to_entities(
    commit: &str,
    path: &str,
    dev: &DevId,
    changed_lines: &[u32],
    spans: &[EntitySpan],
    mode: CountingMode,
    gap: u32,
    fallback: bool,
) -> Vec<EntityChange> {
    let mut records = Vec::new();
    let name_of = |line: u32| -> Option<String> {
        match entity_for_line(line, spans) {
            Some(span) => Some(span.name.clone()),
            None if fallback => Some(FILE_FALLBACK_ENTITY.to_string()),
            None => None,
        }
    };
    match mode {
        CountingMode::SummarisePerEntity => {
            let mut per_entity: Vec<(String, u32)> = Vec::new();
            for &line in changed_lines {
                let Some(name) = name_of(line) else { continue };
                match per_entity.iter_mut().find(|(n, _)| *n == name) {
                    Some((_, c)) => *c += 1,
                    None => per_entity.push((name, 1)),
                }
            }
            for (name, count) in per_entity {
                records.push(EntityChange {
                    commit: commit.to_string(),
                    path: path.to_string(),
                    entity_name: name,
                    dev: dev.clone(),
                    lines_changed: count,
                    block_index: None,
                    counting_mode: mode,
                });
            }
        }
        CountingMode::DistinctBlocks => {
            for (i, block) in detect_blocks_proximity(changed_lines, gap).iter().enumerate() {
                let mut parts: Vec<(String, u32)> = Vec::new();
                for &line in changed_lines
                    .iter()
                    .filter(|&&l| block.start_line <= l && l <= block.end_line)
                {
                    let Some(name) = name_of(line) else { continue };
                    match parts.iter_mut().find(|(n, _)| *n == name) {
                        Some((_, c)) => *c += 1,
                        None => parts.push((name, 1)),
                    }
                }
                for (name, count) in parts {
                    records.push(EntityChange {
                        commit: commit.to_string(),
                        path: path.to_string(),
                        entity_name: name,
                        dev: dev.clone(),
                        lines_changed: count,
                        block_index: Some(i as u32),
                        counting_mode: mode,
                    });
                }
            }
        }
    }
    records
}
