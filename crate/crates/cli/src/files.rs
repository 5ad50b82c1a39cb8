use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use emflow::{read_flo, read_pgm, FlowField, LabelMap};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn load_flow(path: &Path) -> Result<FlowField<f64>> {
    let bytes = read_bytes(path)?;
    read_flo(&bytes).with_context(|| format!("{}", path.display()))
}

pub fn load_pgm(path: &Path) -> Result<LabelMap> {
    let bytes = read_bytes(path)?;
    read_pgm(&bytes).with_context(|| format!("{}", path.display()))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let name = path
        .file_name()
        .ok_or_else(|| anyhow!("not a file path: {}", path.display()))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| -> std::io::Result<()> {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("cannot write {}", path.display()))
}

pub fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| anyhow!("cannot derive a name from {}", path.display()))
}

/// `<dir>/<stem><suffix>`.
pub fn sibling(dir: &Path, stem: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{stem}{suffix}"))
}

/// `path` with `.manifest` appended to the file name.
pub fn manifest_for(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

/// Every `.pgm` under `root`, as paths relative to it, sorted.
pub fn find_pgms(root: &Path) -> Result<Vec<PathBuf>> {
    fn walk(root: &Path, rel: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let dir = root.join(rel);
        let entries = fs::read_dir(&dir).with_context(|| format!("cannot read directory {}", dir.display()))?;
        for entry in entries {
            let entry = entry.with_context(|| format!("cannot read directory {}", dir.display()))?;
            let child = rel.join(entry.file_name());
            if entry.file_type()?.is_dir() {
                walk(root, &child, out)?;
            } else if child.extension().is_some_and(|e| e == "pgm") {
                out.push(child);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, Path::new(""), &mut out)?;
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_bytes(Path::new("/nonexistent/x.flo")).unwrap_err();
        assert!(format!("{err:#}").contains("/nonexistent/x.flo"));
    }

    #[test]
    fn finds_nested_pgms() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(&dir.path().join("b/2.pgm"), b"").unwrap();
        write_atomic(&dir.path().join("a/1.pgm"), b"").unwrap();
        write_atomic(&dir.path().join("a/notes.txt"), b"").unwrap();
        let found = find_pgms(dir.path()).unwrap();
        assert_eq!(found, vec![PathBuf::from("a/1.pgm"), PathBuf::from("b/2.pgm")]);
    }
}
