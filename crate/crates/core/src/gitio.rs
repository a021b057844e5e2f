//! Invoke the git command line on a local repository and parse logs, numstat
//! diffs and blame output into immutable fact tables.
//!
//! Git is an external process with pinned flag sets; merge commits are
//! counted but contribute file changes only from their diff against the
//! first parent. Extraction is deterministic: tables are ordered by
//! (commit_time, hash) regardless of traversal or parallel schedule.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::RawIdentity;

#[derive(Debug, Error)]
pub enum GitError {
    #[error("not a git repository: {0}")]
    NotARepository(PathBuf),
    #[error("unknown branch or revision: {0}")]
    UnknownBranch(String),
    #[error("git executable not runnable ({binary}): {source}")]
    GitMissing {
        binary: String,
        source: std::io::Error,
    },
    #[error("git {args:?} failed: {stderr}")]
    CommandFailed { args: Vec<String>, stderr: String },
    #[error("unparseable numstat line: {0:?}")]
    ParseNumstat(String),
    #[error("unparseable log record: {0:?}")]
    ParseLog(String),
    #[error("path {path:?} absent at commit {commit}")]
    PathAbsent { commit: String, path: String },
    #[error("invalid filter pattern {pattern:?}: {source}")]
    InvalidPattern {
        pattern: String,
        source: regex::Error,
    },
}

pub type Result<T> = std::result::Result<T, GitError>;

/// Commit traversal variant: the whole ref graph or one branch's history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchMode {
    AllBranches,
    Single(String),
}

impl std::fmt::Display for BranchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BranchMode::AllBranches => f.write_str("all_branches"),
            BranchMode::Single(b) => write!(f, "single:{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchScope {
    SingleBranch,
    AllBranches,
}

/// One commit as parsed from the log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitRecord {
    pub hash: String,
    pub author_name: String,
    pub author_email: String,
    pub committer_name: String,
    pub committer_email: String,
    /// Author timestamp, UTC seconds. Drives window assignment.
    pub author_time: i64,
    pub commit_time: i64,
    pub parents: Vec<String>,
    pub branch_scope: BranchScope,
}

impl CommitRecord {
    pub fn author(&self) -> RawIdentity {
        RawIdentity::new(self.author_name.clone(), self.author_email.clone())
    }

    pub fn committer(&self) -> RawIdentity {
        RawIdentity::new(self.committer_name.clone(), self.committer_email.clone())
    }

    pub fn is_merge(&self) -> bool {
        self.parents.len() > 1
    }
}

/// One changed path in one commit. Binary changes carry unknown counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileChange {
    pub commit: String,
    pub path: String,
    pub old_path: Option<String>,
    pub lines_added: Option<u32>,
    pub lines_deleted: Option<u32>,
    pub is_binary: bool,
}

impl FileChange {
    /// Unknown (binary) counts propagate as zero churn.
    pub fn churn(&self) -> u32 {
        self.lines_added.unwrap_or(0) + self.lines_deleted.unwrap_or(0)
    }
}

/// Ownership of one line of one file at one commit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineAttribution {
    pub commit: String,
    pub path: String,
    pub line_no: u32,
    pub owner_commit: String,
    pub owner_dev: RawIdentity,
}

/// One `@@ -a,b +c,d @@` hunk of a unified diff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hunk {
    pub old_start: u32,
    pub old_count: u32,
    pub new_start: u32,
    pub new_count: u32,
}

impl Hunk {
    /// Post-image lines added by this hunk.
    pub fn added_lines(&self) -> impl Iterator<Item = u32> {
        self.new_start..self.new_start + self.new_count
    }

    /// Pre-image lines removed by this hunk.
    pub fn deleted_lines(&self) -> impl Iterator<Item = u32> {
        self.old_start..self.old_start + self.old_count
    }

    pub fn is_deletion_only(&self) -> bool {
        self.new_count == 0 && self.old_count > 0
    }
}

/// File filtering rules: kept = allow-pass AND deny-fail. An empty config is
/// the identity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Anchored regular expressions; empty list admits every path.
    #[serde(default)]
    pub allow_patterns: Vec<String>,
    /// Anchored regular expressions; any match drops the path.
    #[serde(default)]
    pub deny_patterns: Vec<String>,
    /// Extension literals (with or without leading dot), e.g. ".md".
    #[serde(default)]
    pub deny_extensions: Vec<String>,
}

impl FilterConfig {
    pub fn is_empty(&self) -> bool {
        self.allow_patterns.is_empty()
            && self.deny_patterns.is_empty()
            && self.deny_extensions.is_empty()
    }

    pub fn compile(&self) -> Result<CompiledFilters> {
        let anchor = |p: &String| -> Result<Regex> {
            Regex::new(&format!("^(?:{p})")).map_err(|source| GitError::InvalidPattern {
                pattern: p.clone(),
                source,
            })
        };
        Ok(CompiledFilters {
            allow: self.allow_patterns.iter().map(anchor).collect::<Result<_>>()?,
            deny: self.deny_patterns.iter().map(anchor).collect::<Result<_>>()?,
            deny_extensions: self
                .deny_extensions
                .iter()
                .map(|e| e.trim_start_matches('.').to_string())
                .collect(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct CompiledFilters {
    allow: Vec<Regex>,
    deny: Vec<Regex>,
    deny_extensions: Vec<String>,
}

impl CompiledFilters {
    pub fn keeps(&self, path: &str) -> bool {
        if !self.allow.is_empty() && !self.allow.iter().any(|r| r.is_match(path)) {
            return false;
        }
        if self.deny.iter().any(|r| r.is_match(path)) {
            return false;
        }
        if !self.deny_extensions.is_empty() {
            let ext = path.rsplit('.').next().unwrap_or("");
            if path.contains('.') && self.deny_extensions.iter().any(|e| e == ext) {
                return false;
            }
        }
        true
    }
}

/// Keep changes passing the allow set and failing every deny rule.
pub fn apply_file_filters(changes: &[FileChange], filters: &CompiledFilters) -> Vec<FileChange> {
    changes
        .iter()
        .filter(|c| filters.keeps(&c.path))
        .cloned()
        .collect()
}

/// Handle to a local repository plus the git binary used to query it.
#[derive(Debug, Clone)]
pub struct GitRepo {
    binary: String,
    path: PathBuf,
}

impl GitRepo {
    /// Open a repository, honouring the `GITPRISM_GIT` binary override.
    pub fn open(path: impl AsRef<Path>) -> Result<GitRepo> {
        let binary = std::env::var("GITPRISM_GIT").unwrap_or_else(|_| "git".to_string());
        Self::open_with_binary(path, &binary)
    }

    pub fn open_with_binary(path: impl AsRef<Path>, binary: &str) -> Result<GitRepo> {
        let repo = GitRepo {
            binary: binary.to_string(),
            path: path.as_ref().to_path_buf(),
        };
        if !repo.path.is_dir() {
            return Err(GitError::NotARepository(repo.path));
        }
        repo.run(&["rev-parse", "--git-dir"])
            .map_err(|e| match e {
                GitError::CommandFailed { .. } => GitError::NotARepository(repo.path.clone()),
                other => other,
            })?;
        Ok(repo)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn run(&self, args: &[&str]) -> Result<String> {
        Ok(String::from_utf8_lossy(&self.run_bytes(args)?).into_owned())
    }

    fn run_bytes(&self, args: &[&str]) -> Result<Vec<u8>> {
        let out = Command::new(&self.binary)
            .args(args)
            .current_dir(&self.path)
            .output()
            .map_err(|source| GitError::GitMissing {
                binary: self.binary.clone(),
                source,
            })?;
        if !out.status.success() {
            return Err(GitError::CommandFailed {
                args: args.iter().map(|s| s.to_string()).collect(),
                stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
            });
        }
        Ok(out.stdout)
    }

    /// Reachable commit set under the traversal variant, via `git rev-list`.
    pub fn rev_list(&self, mode: &BranchMode) -> Result<BTreeSet<String>> {
        let out = match mode {
            BranchMode::AllBranches => self.run(&["rev-list", "--all"])?,
            BranchMode::Single(branch) => {
                self.run(&["rev-list", branch]).map_err(|e| match e {
                    GitError::CommandFailed { stderr, .. }
                        if stderr.contains("unknown revision")
                            || stderr.contains("bad revision")
                            || stderr.contains("ambiguous argument") =>
                    {
                        GitError::UnknownBranch(branch.clone())
                    }
                    other => other,
                })?
            }
        };
        Ok(out.lines().map(|l| l.trim().to_string()).collect())
    }

    /// Parse the log (headers + numstat) for the traversal variant.
    ///
    /// Output is one record per reachable commit, ordered by
    /// (commit_time, hash); merge commits get their file changes from a
    /// first-parent diff.
    pub fn extract_commits(&self, mode: &BranchMode) -> Result<(Vec<CommitRecord>, Vec<FileChange>)> {
        let revs = self.rev_list(mode)?;
        if revs.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        let scope = match mode {
            BranchMode::AllBranches => BranchScope::AllBranches,
            BranchMode::Single(_) => BranchScope::SingleBranch,
        };
        let format = "%x1e%H%x1f%an%x1f%ae%x1f%cn%x1f%ce%x1f%ad%x1f%cd%x1f%P";
        let pretty = format!("--pretty=format:{format}");
        let mut args: Vec<&str> = vec!["log", "--numstat", "--date=raw", &pretty];
        let branch_arg;
        match mode {
            BranchMode::AllBranches => args.push("--all"),
            BranchMode::Single(branch) => {
                branch_arg = branch.clone();
                args.push(&branch_arg);
            }
        }
        let raw = self.run(&args)?;

        let mut commits = Vec::new();
        let mut changes = Vec::new();
        for record in raw.split('\u{1e}').filter(|r| !r.trim().is_empty()) {
            let mut lines = record.lines();
            let header = lines.next().ok_or_else(|| GitError::ParseLog(record.into()))?;
            let fields: Vec<&str> = header.split('\u{1f}').collect();
            if fields.len() != 8 {
                return Err(GitError::ParseLog(header.into()));
            }
            let hash = fields[0].to_string();
            if !revs.contains(&hash) {
                continue;
            }
            let parse_raw_date = |s: &str| -> Result<i64> {
                s.split_whitespace()
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| GitError::ParseLog(s.into()))
            };
            let parents: Vec<String> = fields[7]
                .split_whitespace()
                .map(|s| s.to_string())
                .collect();
            let is_merge = parents.len() > 1;
            let commit = CommitRecord {
                hash: hash.clone(),
                author_name: fields[1].to_string(),
                author_email: fields[2].to_string(),
                committer_name: fields[3].to_string(),
                committer_email: fields[4].to_string(),
                author_time: parse_raw_date(fields[5])?,
                commit_time: parse_raw_date(fields[6])?,
                parents,
                branch_scope: scope,
            };
            if is_merge {
                // first-parent diff, only non-empty results contribute rows
                changes.extend(self.extract_file_changes_against(
                    &commit.parents[0].clone(),
                    &hash,
                )?);
            } else {
                for line in lines.filter(|l| !l.trim().is_empty()) {
                    changes.push(parse_numstat_line(&hash, line)?);
                }
            }
            commits.push(commit);
        }
        commits.sort_by(|a, b| (a.commit_time, &a.hash).cmp(&(b.commit_time, &b.hash)));
        let order: std::collections::BTreeMap<&str, usize> = commits
            .iter()
            .enumerate()
            .map(|(i, c)| (c.hash.as_str(), i))
            .collect();
        changes.sort_by(|a, b| {
            (order.get(a.commit.as_str()), &a.path).cmp(&(order.get(b.commit.as_str()), &b.path))
        });
        Ok((commits, changes))
    }

    /// File changes of one commit against its first parent (or the empty
    /// tree for root commits), via `git diff --numstat`.
    pub fn extract_file_changes(&self, commit: &str) -> Result<Vec<FileChange>> {
        let parents = self.run(&["rev-list", "--parents", "-n", "1", commit])?;
        let mut ids = parents.split_whitespace();
        let _self_id = ids.next();
        match ids.next() {
            Some(parent) => self.extract_file_changes_against(parent, commit),
            None => self.extract_file_changes_against(EMPTY_TREE, commit),
        }
    }

    fn extract_file_changes_against(&self, parent: &str, commit: &str) -> Result<Vec<FileChange>> {
        let out = self.run(&["diff", "--numstat", "-M", parent, commit])?;
        out.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| parse_numstat_line(commit, l))
            .collect()
    }

    /// Line ownership of `path` at `commit` via `git blame --line-porcelain`.
    pub fn blame_at(&self, commit: &str, path: &str) -> Result<Vec<LineAttribution>> {
        let out = self
            .run(&["blame", "-w", "--line-porcelain", commit, "--", path])
            .map_err(|e| match e {
                GitError::CommandFailed { stderr, .. }
                    if stderr.contains("no such path") || stderr.contains("does not exist") =>
                {
                    GitError::PathAbsent {
                        commit: commit.to_string(),
                        path: path.to_string(),
                    }
                }
                other => other,
            })?;
        let mut attributions = Vec::new();
        let mut owner_commit = String::new();
        let mut line_no = 0u32;
        let mut author = String::new();
        let mut mail = String::new();
        for line in out.lines() {
            if line.starts_with('\t') {
                // content line terminates one group
                attributions.push(LineAttribution {
                    commit: commit.to_string(),
                    path: path.to_string(),
                    line_no,
                    owner_commit: owner_commit.clone(),
                    owner_dev: RawIdentity::new(author.clone(), mail.clone()),
                });
            } else if let Some(rest) = line.strip_prefix("author ") {
                author = rest.to_string();
            } else if let Some(rest) = line.strip_prefix("author-mail ") {
                mail = rest.trim_start_matches('<').trim_end_matches('>').to_string();
            } else {
                // group header: "<40-hex sha> <orig-line> <final-line> [count]";
                // all other porcelain tags are skipped
                let mut parts = line.split_whitespace();
                if let (Some(sha), Some(_), Some(fin)) = (parts.next(), parts.next(), parts.next())
                {
                    if sha.len() == 40 && sha.chars().all(|c| c.is_ascii_hexdigit()) {
                        owner_commit = sha.to_string();
                        line_no = fin.parse().unwrap_or(0);
                    }
                }
            }
        }
        Ok(attributions)
    }

    /// File content at a revision; `None` when the path is absent there.
    pub fn file_at(&self, commit: &str, path: &str) -> Option<String> {
        self.run_bytes(&["show", &format!("{commit}:{path}")])
            .ok()
            .map(|bytes| String::from_utf8_lossy(&bytes).into_owned())
    }

    /// Zero-context hunks of one path between two revisions.
    pub fn diff_hunks(&self, parent: &str, commit: &str, path: &str) -> Result<Vec<Hunk>> {
        let out = self.run(&["diff", "-U0", "-M", parent, commit, "--", path])?;
        Ok(parse_hunks(&out))
    }

    /// Paths present at a revision (recursive tree listing).
    pub fn ls_tree(&self, commit: &str) -> Result<Vec<String>> {
        let out = self.run(&["ls-tree", "-r", "--name-only", commit])?;
        Ok(out.lines().map(|l| l.to_string()).collect())
    }

    /// First parent hash, if any.
    pub fn first_parent(&self, commit: &str) -> Result<Option<String>> {
        let parents = self.run(&["rev-list", "--parents", "-n", "1", commit])?;
        Ok(parents.split_whitespace().nth(1).map(|s| s.to_string()))
    }
}

/// The well-known empty tree object, diff base for root commits.
pub const EMPTY_TREE: &str = "4b825dc642cb6eb9a060e54bf8d69288fbee4904";

/// One file's portion of a unified diff: hunks plus changed line numbers and
/// texts on both images.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileDiff {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub is_binary: bool,
    pub hunks: Vec<Hunk>,
    /// Post-image line numbers added by the diff.
    pub added_lines: Vec<u32>,
    /// Pre-image line numbers removed by the diff.
    pub deleted_lines: Vec<u32>,
    /// Pre-image lines removed by hunks that add nothing.
    pub deleted_only_lines: Vec<u32>,
    pub added_text: String,
    pub deleted_text: String,
}

impl FileDiff {
    /// The path this change is recorded under (post-image when present).
    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or("")
    }
}

fn strip_diff_prefix(path: &str) -> Option<String> {
    let unquoted = unquote_git_path(path);
    if unquoted == "/dev/null" {
        return None;
    }
    let stripped = unquoted
        .strip_prefix("a/")
        .or_else(|| unquoted.strip_prefix("b/"))
        .unwrap_or(&unquoted);
    Some(stripped.to_string())
}

/// Parse `git diff -U0` output into per-file changes.
pub fn parse_unified_diff(text: &str) -> Vec<FileDiff> {
    let mut files: Vec<FileDiff> = Vec::new();
    let mut current: Option<FileDiff> = None;
    // counters inside the active hunk
    let mut old_line = 0u32;
    let mut new_line = 0u32;
    for line in text.lines() {
        if line.starts_with("diff --git ") {
            if let Some(f) = current.take() {
                files.push(f);
            }
            let mut file = FileDiff::default();
            // heuristic fallback for paths; rename/---/+++ lines refine it
            let rest = &line["diff --git ".len()..];
            if let Some(pos) = rest.rfind(" b/") {
                file.old_path = strip_diff_prefix(&rest[..pos]);
                file.new_path = strip_diff_prefix(&rest[pos + 1..]);
            }
            current = Some(file);
            continue;
        }
        let Some(file) = current.as_mut() else {
            continue;
        };
        // header lines occur only before the first hunk; content lines
        // inside hunks always carry a +/- prefix and may themselves start
        // with dashes, so the hunk guard disambiguates
        if file.hunks.is_empty() && line.starts_with("rename from ") {
            file.old_path = Some(unquote_git_path(&line["rename from ".len()..]));
        } else if file.hunks.is_empty() && line.starts_with("rename to ") {
            file.new_path = Some(unquote_git_path(&line["rename to ".len()..]));
        } else if file.hunks.is_empty() && line.starts_with("--- ") {
            file.old_path = strip_diff_prefix(&line[4..]);
        } else if file.hunks.is_empty() && line.starts_with("+++ ") {
            file.new_path = strip_diff_prefix(&line[4..]);
        } else if line.starts_with("Binary files ") || line.starts_with("GIT binary patch") {
            file.is_binary = true;
        } else if line.starts_with("@@") {
            let parsed = parse_hunks(line);
            if let Some(h) = parsed.first() {
                old_line = h.old_start;
                new_line = h.new_start;
                if h.is_deletion_only() {
                    file.deleted_only_lines.extend(h.deleted_lines());
                }
                file.hunks.push(*h);
            }
        } else if let Some(rest) = line.strip_prefix('+') {
            file.added_lines.push(new_line);
            file.added_text.push_str(rest);
            file.added_text.push('\n');
            new_line += 1;
        } else if let Some(rest) = line.strip_prefix('-') {
            file.deleted_lines.push(old_line);
            file.deleted_text.push_str(rest);
            file.deleted_text.push('\n');
            old_line += 1;
        }
    }
    if let Some(f) = current.take() {
        files.push(f);
    }
    files
}

impl GitRepo {
    /// All per-file changes of one commit against a base revision, parsed
    /// from a single zero-context diff.
    pub fn commit_diff(&self, parent: &str, commit: &str) -> Result<Vec<FileDiff>> {
        let out = self.run(&["diff", "-U0", "-M", parent, commit])?;
        Ok(parse_unified_diff(&out))
    }
}

fn parse_hunks(diff: &str) -> Vec<Hunk> {
    let mut hunks = Vec::new();
    for line in diff.lines() {
        if !line.starts_with("@@") {
            continue;
        }
        let parse_range = |tok: &str| -> Option<(u32, u32)> {
            let tok = tok.trim_start_matches(['-', '+']);
            match tok.split_once(',') {
                Some((s, c)) => Some((s.parse().ok()?, c.parse().ok()?)),
                None => Some((tok.parse().ok()?, 1)),
            }
        };
        let mut parts = line.split_whitespace();
        let _at = parts.next();
        let (Some(old), Some(new)) = (
            parts.next().and_then(parse_range),
            parts.next().and_then(parse_range),
        ) else {
            continue;
        };
        hunks.push(Hunk {
            old_start: old.0,
            old_count: old.1,
            new_start: new.0,
            new_count: new.1,
        });
    }
    hunks
}

fn unquote_git_path(path: &str) -> String {
    if !(path.starts_with('"') && path.ends_with('"') && path.len() >= 2) {
        return path.to_string();
    }
    let inner = &path[1..path.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some('"') => out.push('"'),
            Some(other) => out.push(other),
            None => {}
        }
    }
    out
}

/// Split a numstat path field into (new path, old path): handles the
/// `prefix{old => new}suffix` and plain `old => new` rename notations.
fn parse_rename(field: &str) -> (String, Option<String>) {
    if let (Some(open), Some(close)) = (field.find('{'), field.rfind('}')) {
        if open < close {
            let inside = &field[open + 1..close];
            if let Some((old_mid, new_mid)) = inside.split_once(" => ") {
                let prefix = &field[..open];
                let suffix = &field[close + 1..];
                let squash = |s: String| s.replace("//", "/");
                let old = squash(format!("{prefix}{old_mid}{suffix}"));
                let new = squash(format!("{prefix}{new_mid}{suffix}"));
                return (new, Some(old));
            }
        }
    }
    if let Some((old, new)) = field.split_once(" => ") {
        return (new.to_string(), Some(old.to_string()));
    }
    (field.to_string(), None)
}

fn parse_numstat_line(commit: &str, line: &str) -> Result<FileChange> {
    let mut parts = line.splitn(3, '\t');
    let (Some(added), Some(deleted), Some(path_field)) = (parts.next(), parts.next(), parts.next())
    else {
        return Err(GitError::ParseNumstat(line.to_string()));
    };
    let parse_count = |tok: &str| -> Result<Option<u32>> {
        if tok == "-" {
            Ok(None)
        } else {
            tok.parse::<u32>()
                .map(Some)
                .map_err(|_| GitError::ParseNumstat(line.to_string()))
        }
    };
    let lines_added = parse_count(added.trim())?;
    let lines_deleted = parse_count(deleted.trim())?;
    if lines_added.is_none() != lines_deleted.is_none() {
        return Err(GitError::ParseNumstat(line.to_string()));
    }
    let (path, old_path) = parse_rename(&unquote_git_path(path_field));
    if path.is_empty() {
        return Err(GitError::ParseNumstat(line.to_string()));
    }
    let is_binary = lines_added.is_none();
    Ok(FileChange {
        commit: commit.to_string(),
        path,
        old_path,
        lines_added,
        lines_deleted,
        is_binary,
    })
}
