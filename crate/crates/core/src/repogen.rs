//! Scripted construction of git repositories with pinned authors and
//! timestamps. Used to build deterministic fixture histories.

use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RepoGenError {
    #[error("failed to run git: {0}")]
    Spawn(#[from] std::io::Error),
    #[error("git {args:?} failed: {stderr}")]
    Git { args: Vec<String>, stderr: String },
}

pub struct RepoBuilder {
    dir: PathBuf,
    git: String,
}

impl RepoBuilder {
    /// `git init` with `main` as the initial branch.
    pub fn init(dir: impl AsRef<Path>) -> Result<Self, RepoGenError> {
        let builder = RepoBuilder {
            dir: dir.as_ref().to_path_buf(),
            git: std::env::var("GITPRISM_GIT").unwrap_or_else(|_| "git".to_string()),
        };
        std::fs::create_dir_all(&builder.dir)?;
        builder.git(&["init", "-q", "-b", "main"])?;
        builder.git(&["config", "user.name", "fixture"])?;
        builder.git(&["config", "user.email", "fixture@example.org"])?;
        builder.git(&["config", "commit.gpgsign", "false"])?;
        Ok(builder)
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn git(&self, args: &[&str]) -> Result<String, RepoGenError> {
        self.git_with_env(args, &[])
    }

    fn git_with_env(&self, args: &[&str], env: &[(&str, String)]) -> Result<String, RepoGenError> {
        let mut cmd = Command::new(&self.git);
        cmd.args(args).current_dir(&self.dir);
        for (k, v) in env {
            cmd.env(k, v);
        }
        let out = cmd.output()?;
        if !out.status.success() {
            return Err(RepoGenError::Git {
                args: args.iter().map(|s| s.to_string()).collect(),
                stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
            });
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    pub fn write(&self, rel: &str, content: &str) -> Result<(), RepoGenError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, content)?;
        Ok(())
    }

    pub fn write_bytes(&self, rel: &str, content: &[u8]) -> Result<(), RepoGenError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, content)?;
        Ok(())
    }

    pub fn remove(&self, rel: &str) -> Result<(), RepoGenError> {
        std::fs::remove_file(self.dir.join(rel))?;
        Ok(())
    }

    pub fn rename(&self, from: &str, to: &str) -> Result<(), RepoGenError> {
        let target = self.dir.join(to);
        if let Some(parent) = target.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::rename(self.dir.join(from), target)?;
        Ok(())
    }

    /// Stage everything and commit with pinned author/committer and time.
    pub fn commit(
        &self,
        author: (&str, &str),
        time: i64,
        message: &str,
    ) -> Result<String, RepoGenError> {
        self.git(&["add", "-A"])?;
        let date = format!("{time} +0000");
        self.git_with_env(
            &["commit", "-q", "--allow-empty", "-m", message],
            &[
                ("GIT_AUTHOR_NAME", author.0.to_string()),
                ("GIT_AUTHOR_EMAIL", author.1.to_string()),
                ("GIT_AUTHOR_DATE", date.clone()),
                ("GIT_COMMITTER_NAME", author.0.to_string()),
                ("GIT_COMMITTER_EMAIL", author.1.to_string()),
                ("GIT_COMMITTER_DATE", date),
            ],
        )?;
        Ok(self.git(&["rev-parse", "HEAD"])?.trim().to_string())
    }

    pub fn branch(&self, name: &str) -> Result<(), RepoGenError> {
        self.git(&["checkout", "-q", "-b", name])?;
        Ok(())
    }

    pub fn checkout(&self, name: &str) -> Result<(), RepoGenError> {
        self.git(&["checkout", "-q", name])?;
        Ok(())
    }

    /// Merge `branch` into the current branch (no fast-forward).
    pub fn merge(
        &self,
        branch: &str,
        author: (&str, &str),
        time: i64,
    ) -> Result<String, RepoGenError> {
        let date = format!("{time} +0000");
        self.git_with_env(
            &["merge", "-q", "--no-ff", "--no-edit", branch],
            &[
                ("GIT_AUTHOR_NAME", author.0.to_string()),
                ("GIT_AUTHOR_EMAIL", author.1.to_string()),
                ("GIT_AUTHOR_DATE", date.clone()),
                ("GIT_COMMITTER_NAME", author.0.to_string()),
                ("GIT_COMMITTER_EMAIL", author.1.to_string()),
                ("GIT_COMMITTER_DATE", date),
            ],
        )?;
        Ok(self.git(&["rev-parse", "HEAD"])?.trim().to_string())
    }

    /// Raw git escape hatch for oracle queries in tests.
    pub fn run(&self, args: &[&str]) -> Result<String, RepoGenError> {
        self.git(args)
    }
}
