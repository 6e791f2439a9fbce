use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{canonical_json, to_json_string, VosDocument, ENGINE_VERSION};
use crate::netbuild::NetworkKind;

pub const VOSVIEWER_ONLINE_URL: &str = "https://app.vosviewer.com/";

const LOCK_FILE: &str = ".dimnet.lock";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const INDEX_FILE: &str = "index.html";
pub const NETWORKS_DIR: &str = "networks";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("cannot write bundle at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bundle directory {} is locked by another run (remove {} if that run is gone)", dir.display(), dir.join(LOCK_FILE).display())]
    Locked { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEntry {
    pub query_name: String,
    pub kind: NetworkKind,
    /// Relative to the bundle root, `/`-separated.
    pub file: String,
    pub items: usize,
    pub links: usize,
    pub subset_size: usize,
    /// Set when the slug collided with an earlier network and was suffixed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renamed_from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub engine_version: String,
    pub generated_at: DateTime<Utc>,
    pub networks: Vec<BundleEntry>,
}

impl BundleManifest {
    pub fn read(dir: &Path) -> io::Result<BundleManifest> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Every file the bundle consists of, relative to its root.
    pub fn files(&self) -> Vec<String> {
        let mut files: Vec<String> = self.networks.iter().map(|e| e.file.clone()).collect();
        files.push(INDEX_FILE.to_string());
        files.push(MANIFEST_FILE.to_string());
        files
    }
}

/// Lowercases, maps every run of non-alphanumeric characters to one `-`,
/// and trims dashes from the ends. An empty result becomes `network`.
pub fn slugify(name: &str) -> String {
    let mut slug = String::with_capacity(name.len());
    for c in name.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() {
            slug.push(c);
        } else if !slug.ends_with('-') {
            slug.push('-');
        }
    }
    let slug = slug.trim_matches('-');
    if slug.is_empty() {
        "network".to_string()
    } else {
        slug.to_string()
    }
}

struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<DirLock, BundleError> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock(path))
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(BundleError::Locked {
                dir: dir.to_path_buf(),
            }),
            Err(source) => Err(BundleError::Io { path, source }),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write_atomic(dir: &Path, name: &Path, contents: &str) -> Result<(), BundleError> {
    let target = dir.join(name);
    let io_err = |source| BundleError::Io {
        path: target.clone(),
        source,
    };
    let parent = target.parent().unwrap_or(dir);
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.persist(&target).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Writes one JSON file per document under `networks/`, then `index.html`
/// and `manifest.json`. Each file is replaced atomically.
pub fn write_bundle(
    documents: &[VosDocument],
    out_dir: &Path,
) -> Result<BundleManifest, BundleError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BundleError::Io { path, source }
    };
    let networks_dir = out_dir.join(NETWORKS_DIR);
    fs::create_dir_all(&networks_dir).map_err(io_err(&networks_dir))?;
    let _lock = DirLock::acquire(out_dir)?;

    let mut used = HashSet::new();
    let mut entries = Vec::with_capacity(documents.len());
    for doc in documents {
        let kind = doc.metadata.kind;
        let base = slugify(&doc.metadata.query_name);
        let mut slug = base.clone();
        let mut n = 1;
        while !used.insert(format!("{slug}__{kind}")) {
            n += 1;
            slug = format!("{base}-{n}");
        }
        let file = format!("{NETWORKS_DIR}/{slug}__{kind}.json");
        write_atomic(out_dir, Path::new(&file), &to_json_string(doc))?;
        entries.push(BundleEntry {
            query_name: doc.metadata.query_name.clone(),
            kind,
            file,
            items: doc.network.items.len(),
            links: doc.network.links.len(),
            subset_size: doc.metadata.subset_size,
            renamed_from: (slug != base).then_some(base),
        });
    }

    let manifest = BundleManifest {
        engine_version: ENGINE_VERSION.to_string(),
        generated_at: Utc::now(),
        networks: entries,
    };
    write_atomic(out_dir, Path::new(INDEX_FILE), &render_index(&manifest))?;
    write_atomic(
        out_dir,
        Path::new(MANIFEST_FILE),
        &canonical_json(&manifest),
    )?;
    Ok(manifest)
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Static index page. Links into the bundle are relative; the VOSviewer
/// Online links carry the relative path and a small inline script rewrites
/// them to absolute URLs from the page location.
fn render_index(manifest: &BundleManifest) -> String {
    let mut rows = String::new();
    for e in &manifest.networks {
        let file = escape_html(&e.file);
        rows.push_str(&format!(
            "      <tr>\n        <td>{}</td>\n        <td>{}</td>\n        <td>{}</td>\n        <td>{}</td>\n        <td>{}</td>\n        <td><a class=\"vos\" data-json=\"{file}\" href=\"{VOSVIEWER_ONLINE_URL}?json={file}\">open in VOSviewer</a></td>\n        <td><a href=\"{file}\" download>JSON</a></td>\n      </tr>\n",
            escape_html(&e.query_name),
            e.kind,
            e.subset_size,
            e.items,
            e.links,
        ));
    }
    format!(
        r#"<!DOCTYPE html>
<html lang="en">
<head>
  <meta charset="utf-8">
  <title>Co-occurrence networks</title>
  <style>
    body {{ font-family: sans-serif; margin: 2em; }}
    table {{ border-collapse: collapse; }}
    th, td {{ padding: 0.3em 0.8em; border-bottom: 1px solid #ddd; text-align: left; }}
  </style>
</head>
<body>
  <h1>Co-occurrence networks</h1>
  <p>{count} network(s), generated by {engine}. See <a href="manifest.json">manifest.json</a>.</p>
  <table>
    <thead>
      <tr><th>Query</th><th>Kind</th><th>Publications</th><th>Nodes</th><th>Links</th><th></th><th></th></tr>
    </thead>
    <tbody>
{rows}    </tbody>
  </table>
  <script>
    for (const a of document.querySelectorAll("a.vos")) {{
      const url = new URL(a.dataset.json, window.location.href);
      a.href = "{vos}?json=" + encodeURIComponent(url.href);
    }}
  </script>
</body>
</html>
"#,
        count = manifest.networks.len(),
        engine = escape_html(&manifest.engine_version),
        vos = VOSVIEWER_ONLINE_URL,
    )
}
