use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Gold-standard COCO file expected at the dataset root.
pub const ANNOTATIONS_FILE: &str = "annotations.json";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PatchFile {
    pub patient_id: String,
    pub patch_id: String,
    pub path: PathBuf,
}

/// Lists `<root>/<patient_id>/<patch_id>.png`, sorted by patient then patch.
/// Patch ids must be unique across patients.
pub fn scan_patches(root: &Path) -> Result<Vec<PatchFile>> {
    let mut out = Vec::new();
    for patient in fs::read_dir(root)? {
        let patient = patient?;
        if !patient.file_type()?.is_dir() {
            continue;
        }
        let patient_id = patient.file_name().to_string_lossy().into_owned();
        for entry in fs::read_dir(patient.path())? {
            let path = entry?.path();
            let is_png = path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("png"));
            // `.profile` sidecars and similar are skipped by the extension check
            if !is_png || !path.is_file() {
                continue;
            }
            let patch_id = path
                .file_stem()
                .expect("file has a name")
                .to_string_lossy()
                .into_owned();
            out.push(PatchFile {
                patient_id: patient_id.clone(),
                patch_id,
                path,
            });
        }
    }
    out.sort();
    let mut seen = HashSet::new();
    for p in &out {
        if !seen.insert(p.patch_id.as_str()) {
            return Err(Error::Dataset(format!("duplicate patch id {:?}", p.patch_id)));
        }
    }
    Ok(out)
}
