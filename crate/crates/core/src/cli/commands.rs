use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::manifest::{Manifest, OutputDir};
use super::settings::RunConfig;
use super::CliError;
use crate::cyto_roi::segment_cells;
use crate::dataset::{
    export_coco, export_feature_csv, export_geojson, parse_coco, scan_patches, split_by_patient,
    CellInstance, FeatureRow, ParsedCoco, PatchDescriptor, PatchFile, ANNOTATIONS_FILE,
    DEFAULT_FRACTIONS,
};
use crate::error::Error;
use crate::evaluation::{build_report, format_tables, EvalReport, PatchEval};
use crate::expansion::{expand, radius_sweep, SweepPatch, SweepResult};
use crate::morphometry::{feature_record, FeatureRecord};
use crate::patch::ImagePatch;
use crate::stain::{deconvolve, normalize_to_reference, MacenkoParams, StainProfile};
use crate::watershed::detect_nuclei;

type CliResult<T> = std::result::Result<T, CliError>;

pub const PREDICTIONS_FILE: &str = "predictions.json";

/// Settings plus the worker pool shared by every command.
pub struct Context {
    pub cfg: RunConfig,
    pub pool: rayon::ThreadPool,
}

impl Context {
    fn manifest(&self, command: &str, args: &[(&str, String)]) -> Manifest {
        let mut config = self.cfg.snapshot();
        for (k, v) in args {
            config.insert(k.to_string(), v.clone());
        }
        Manifest::new(command, config)
    }

    /// Runs `f` over `items` on the pool; results keep input order.
    fn map<T: Sync, U: Send>(
        &self,
        items: &[T],
        f: impl Fn(&T) -> crate::Result<U> + Sync + Send,
    ) -> crate::Result<Vec<U>> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}

struct Loaded {
    file: PatchFile,
    bytes: Vec<u8>,
    patch: ImagePatch,
}

impl Loaded {
    fn rel_name(&self) -> String {
        format!("{}/{}.png", self.file.patient_id, self.file.patch_id)
    }

    fn descriptor(&self, image_id: u64) -> PatchDescriptor {
        PatchDescriptor {
            image_id,
            file_name: self.rel_name(),
            width: self.patch.width(),
            height: self.patch.height(),
            patient_id: self.file.patient_id.clone(),
            patch_id: self.file.patch_id.clone(),
            scale: self.patch.scale(),
        }
    }

    fn dims(&self) -> (usize, usize) {
        (self.patch.width(), self.patch.height())
    }
}

fn require_dir(path: &Path, what: &str) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} is not a directory", path.display())))
    }
}

/// Patch files under `root`, restricted to the configured split.
fn select_patches(ctx: &Context, root: &Path) -> CliResult<Vec<PatchFile>> {
    require_dir(root, "image directory")?;
    let files = scan_patches(root)?;
    let Some(which) = ctx.cfg.split else {
        return Ok(files);
    };
    let descriptors: Vec<PatchDescriptor> = files
        .iter()
        .enumerate()
        .map(|(i, f)| PatchDescriptor {
            image_id: i as u64 + 1,
            file_name: format!("{}/{}.png", f.patient_id, f.patch_id),
            width: 0,
            height: 0,
            patient_id: f.patient_id.clone(),
            patch_id: f.patch_id.clone(),
            scale: ctx.cfg.scale,
        })
        .collect();
    let split = split_by_patient(&descriptors, DEFAULT_FRACTIONS, ctx.cfg.seed)?;
    let keep: HashSet<&str> = split.get(which).iter().map(String::as_str).collect();
    Ok(files
        .into_iter()
        .filter(|f| keep.contains(f.patch_id.as_str()))
        .collect())
}

fn load_all(ctx: &Context, root: &Path) -> CliResult<Vec<Loaded>> {
    let files = select_patches(ctx, root)?;
    let scale = ctx.cfg.scale;
    Ok(ctx.map(&files, |f| {
        let bytes = fs::read(&f.path)?;
        let patch = ImagePatch::decode_png(&bytes, scale)?
            .with_ids(f.patient_id.clone(), f.patch_id.clone());
        Ok(Loaded {
            file: f.clone(),
            bytes,
            patch,
        })
    })?)
}

fn record_images(manifest: &mut Manifest, loaded: &[Loaded]) {
    for l in loaded {
        manifest.add_input(format!("image:{}", l.rel_name()), &l.bytes);
    }
}

/// Reads a COCO file, or `predictions.json` inside a directory.
fn read_coco(path: &Path, role: &str, manifest: &mut Manifest) -> CliResult<ParsedCoco> {
    let file = if path.is_dir() {
        path.join(PREDICTIONS_FILE)
    } else {
        path.to_path_buf()
    };
    if !file.is_file() {
        return Err(CliError::Usage(format!("{role} file {} not found", file.display())));
    }
    let bytes = fs::read(&file)?;
    manifest.add_input(role.to_string(), &bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Dataset(format!("{} is not UTF-8", file.display())))?;
    let parsed = parse_coco(&text)?;
    if !parsed.issues.is_empty() {
        warn!("{}: {} annotation issue(s)", file.display(), parsed.issues.len());
        for issue in &parsed.issues {
            info!("{issue:?}");
        }
    }
    Ok(parsed)
}

fn group_by_patch(instances: Vec<CellInstance>) -> HashMap<String, Vec<CellInstance>> {
    let mut map: HashMap<String, Vec<CellInstance>> = HashMap::new();
    for inst in instances {
        map.entry(inst.patch_id.clone()).or_default().push(inst);
    }
    map
}

fn write_predictions(
    out: &mut OutputDir,
    loaded: &[Loaded],
    per_patch: &[Vec<CellInstance>],
) -> crate::Result<()> {
    let descriptors: Vec<PatchDescriptor> = loaded
        .iter()
        .enumerate()
        .map(|(i, l)| l.descriptor(i as u64 + 1))
        .collect();
    // COCO annotation ids are unique per file, not per image
    let all: Vec<CellInstance> = per_patch
        .iter()
        .flatten()
        .enumerate()
        .map(|(k, inst)| CellInstance {
            id: k as u64 + 1,
            ..inst.clone()
        })
        .collect();
    out.write(PREDICTIONS_FILE, export_coco(&descriptors, &all).as_bytes())?;
    for (l, instances) in loaded.iter().zip(per_patch) {
        let rel = format!("geojson/{}.geojson", l.file.patch_id);
        out.write(&rel, export_geojson(instances).as_bytes())?;
    }
    Ok(())
}

fn path_arg(p: &Path) -> String {
    p.display().to_string()
}

#[derive(Serialize)]
struct SkipEntry {
    patch_id: String,
    reason: String,
}

pub fn normalize(ctx: &Context, dataset: &Path, out_dir: &Path) -> CliResult<()> {
    require_dir(dataset, "dataset root")?;
    let loaded = load_all(ctx, dataset)?;
    let mut manifest = ctx.manifest("normalize", &[("dataset", path_arg(dataset))]);
    record_images(&mut manifest, &loaded);

    let reference = StainProfile::reference();
    let params = MacenkoParams::default();
    let results = ctx.map(&loaded, |l| {
        match normalize_to_reference(&l.patch, &reference, &params) {
            Ok((img, profile)) => Ok(Ok((img.encode_png()?, profile))),
            Err(e @ (Error::NoTissue { .. } | Error::DegenerateStainMatrix(_))) => Ok(Err(e.to_string())),
            Err(e) => Err(e),
        }
    })?;

    let mut out = OutputDir::create(out_dir, manifest)?;
    let mut skipped = Vec::new();
    for (l, result) in loaded.iter().zip(results) {
        match result {
            Ok((png, profile)) => {
                out.write(&l.rel_name(), &png)?;
                let json = serde_json::to_string_pretty(&profile).expect("profile serializes");
                out.write(&format!("profiles/{}.json", l.file.patch_id), json.as_bytes())?;
            }
            Err(reason) => {
                warn!("skipping {}: {reason}", l.file.patch_id);
                skipped.push(SkipEntry {
                    patch_id: l.file.patch_id.clone(),
                    reason,
                });
            }
        }
    }
    let skip_json = serde_json::to_string_pretty(&skipped).expect("skip list serializes");
    out.write("skipped.json", skip_json.as_bytes())?;
    let annotations = dataset.join(ANNOTATIONS_FILE);
    if annotations.is_file() {
        let bytes = fs::read(&annotations)?;
        out.manifest.add_input("annotations", &bytes);
        out.write(ANNOTATIONS_FILE, &bytes)?;
    }
    info!("normalized {} patch(es), skipped {}", loaded.len() - skipped.len(), skipped.len());
    Ok(out.finish()?)
}

pub fn detect(ctx: &Context, images: &Path, out_dir: &Path) -> CliResult<()> {
    let loaded = load_all(ctx, images)?;
    let mut manifest = ctx.manifest("detect", &[("images", path_arg(images))]);
    record_images(&mut manifest, &loaded);
    let reference = StainProfile::reference();
    let params = ctx.cfg.watershed;
    let per_patch = ctx.map(&loaded, |l| detect_nuclei(&l.patch, &reference, &params))?;
    let mut out = OutputDir::create(out_dir, manifest)?;
    write_predictions(&mut out, &loaded, &per_patch)?;
    info!("detected {} nuclei", per_patch.iter().map(Vec::len).sum::<usize>());
    Ok(out.finish()?)
}

pub fn expand_cells(ctx: &Context, images: &Path, detections: &Path, out_dir: &Path) -> CliResult<()> {
    let loaded = load_all(ctx, images)?;
    let mut manifest = ctx.manifest(
        "expand",
        &[("images", path_arg(images)), ("detections", path_arg(detections))],
    );
    record_images(&mut manifest, &loaded);
    let by_patch = group_by_patch(read_coco(detections, "detections", &mut manifest)?.instances);
    let radius = ctx.cfg.watershed.expansion_radius;
    let per_patch = ctx.map(&loaded, |l| {
        let Some(nuclei) = by_patch.get(&l.file.patch_id) else {
            return Ok(Vec::new());
        };
        let polys: Vec<_> = nuclei.iter().map(|n| n.nucleus.clone()).collect();
        let res = expand(&polys, radius, l.dims(), l.patch.scale())?;
        Ok(res
            .cells
            .into_iter()
            .zip(nuclei)
            .map(|(mut cell, n)| {
                cell.patch_id = l.file.patch_id.clone();
                cell.confidence = n.confidence;
                cell
            })
            .collect())
    })?;
    let mut out = OutputDir::create(out_dir, manifest)?;
    write_predictions(&mut out, &loaded, &per_patch)?;
    Ok(out.finish()?)
}

pub fn cyto(ctx: &Context, images: &Path, detections: &Path, out_dir: &Path) -> CliResult<()> {
    let loaded = load_all(ctx, images)?;
    let mut manifest = ctx.manifest(
        "cyto",
        &[("images", path_arg(images)), ("detections", path_arg(detections))],
    );
    record_images(&mut manifest, &loaded);
    let by_patch = group_by_patch(read_coco(detections, "detections", &mut manifest)?.instances);
    let reference = StainProfile::reference();
    let params = ctx.cfg.cyto;
    let per_patch = ctx.map(&loaded, |l| {
        let Some(nuclei) = by_patch.get(&l.file.patch_id) else {
            return Ok(Vec::new());
        };
        let conc = deconvolve(&l.patch, &reference, 255)?;
        let mut cells = segment_cells(&conc, nuclei, &params)?;
        for c in &mut cells {
            c.patch_id = l.file.patch_id.clone();
        }
        Ok(cells)
    })?;
    let mut out = OutputDir::create(out_dir, manifest)?;
    write_predictions(&mut out, &loaded, &per_patch)?;
    Ok(out.finish()?)
}

/// Feature rows of every whole-cell instance; instances whose cell cannot
/// be measured (degenerate outline, no pixel inside) are skipped.
fn measure(
    ctx: &Context,
    loaded: &[Loaded],
    by_patch: &HashMap<String, Vec<CellInstance>>,
) -> crate::Result<Vec<FeatureRow>> {
    let reference = StainProfile::reference();
    let per_patch = ctx.map(loaded, |l| {
        let Some(instances) = by_patch.get(&l.file.patch_id) else {
            return Ok(Vec::new());
        };
        let conc = deconvolve(&l.patch, &reference, 255)?;
        let mut rows = Vec::new();
        for inst in instances.iter().filter(|i| i.cell.is_some()) {
            match feature_record(inst, &conc, l.patch.scale()) {
                Ok(record) => rows.push(FeatureRow {
                    instance_id: inst.id,
                    patch_id: l.file.patch_id.clone(),
                    record,
                }),
                Err(e @ (Error::EmptyMask | Error::InvalidPolygon(_))) => {
                    warn!("{}: instance {} not measured: {e}", l.file.patch_id, inst.id);
                }
                Err(e) => return Err(e),
            }
        }
        Ok(rows)
    })?;
    Ok(per_patch.into_iter().flatten().collect())
}

pub fn features(ctx: &Context, images: &Path, annotations: &Path, out_dir: &Path) -> CliResult<()> {
    let loaded = load_all(ctx, images)?;
    let mut manifest = ctx.manifest(
        "features",
        &[("images", path_arg(images)), ("annotations", path_arg(annotations))],
    );
    record_images(&mut manifest, &loaded);
    let by_patch = group_by_patch(read_coco(annotations, "annotations", &mut manifest)?.instances);
    let rows = measure(ctx, &loaded, &by_patch)?;
    let mut out = OutputDir::create(out_dir, manifest)?;
    out.write("features.csv", export_feature_csv(&rows)?.as_bytes())?;
    info!("measured {} cell(s)", rows.len());
    Ok(out.finish()?)
}

fn default_gold(images: &Path, gold: Option<&Path>) -> PathBuf {
    gold.map(Path::to_path_buf)
        .unwrap_or_else(|| images.join(ANNOTATIONS_FILE))
}

pub fn eval(
    ctx: &Context,
    images: &Path,
    predictions: &Path,
    gold: Option<&Path>,
    model: &str,
    out_dir: &Path,
) -> CliResult<()> {
    let gold = default_gold(images, gold);
    let loaded = load_all(ctx, images)?;
    let mut manifest = ctx.manifest(
        "eval",
        &[
            ("images", path_arg(images)),
            ("predictions", path_arg(predictions)),
            ("gold", path_arg(&gold)),
            ("model", model.to_string()),
        ],
    );
    record_images(&mut manifest, &loaded);
    let pred = group_by_patch(read_coco(predictions, "predictions", &mut manifest)?.instances);
    let gold_by = group_by_patch(read_coco(&gold, "gold", &mut manifest)?.instances);

    let patches: Vec<PatchEval> = loaded
        .iter()
        .map(|l| PatchEval {
            patch_id: l.file.patch_id.clone(),
            width: l.patch.width(),
            height: l.patch.height(),
            predicted: pred.get(&l.file.patch_id).cloned().unwrap_or_default(),
            gold: gold_by.get(&l.file.patch_id).cloned().unwrap_or_default(),
        })
        .collect();
    let records = |rows: Vec<FeatureRow>| -> Vec<FeatureRecord> { rows.into_iter().map(|r| r.record).collect() };
    let features_pred = records(measure(ctx, &loaded, &pred)?);
    let features_gold = records(measure(ctx, &loaded, &gold_by)?);
    let report = build_report(model, &patches, &features_pred, &features_gold)?;

    let mut out = OutputDir::create(out_dir, manifest)?;
    out.write("report.json", report.to_json().as_bytes())?;
    out.write("report.txt", format_tables(std::slice::from_ref(&report)).as_bytes())?;
    Ok(out.finish()?)
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_radii(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Usage(format!("cannot parse radii {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let radii: Vec<f64> = if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<CliResult<_>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // rounding keeps grid values such as 0.5 * k free of drift
        (0..=n)
            .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
            .collect()
    } else {
        spec.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<CliResult<_>>()?
    };
    if radii.is_empty() || radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(bad());
    }
    Ok(radii)
}

pub fn sweep(
    ctx: &Context,
    images: &Path,
    detections: &Path,
    gold: Option<&Path>,
    radii: &[f64],
    out_dir: &Path,
) -> CliResult<()> {
    let gold = default_gold(images, gold);
    let loaded = load_all(ctx, images)?;
    let radii_text = radii.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    let mut manifest = ctx.manifest(
        "sweep",
        &[
            ("images", path_arg(images)),
            ("detections", path_arg(detections)),
            ("gold", path_arg(&gold)),
            ("radii", radii_text),
        ],
    );
    record_images(&mut manifest, &loaded);
    let nuclei = group_by_patch(read_coco(detections, "detections", &mut manifest)?.instances);
    let gold_by = group_by_patch(read_coco(&gold, "gold", &mut manifest)?.instances);
    let patches: Vec<SweepPatch> = loaded
        .iter()
        .map(|l| SweepPatch {
            patch_id: l.file.patch_id.clone(),
            width: l.patch.width(),
            height: l.patch.height(),
            scale: l.patch.scale(),
            nuclei: nuclei
                .get(&l.file.patch_id)
                .map(|v| v.iter().map(|n| n.nucleus.clone()).collect())
                .unwrap_or_default(),
            gold: gold_by.get(&l.file.patch_id).cloned().unwrap_or_default(),
        })
        .collect();
    let entries = ctx.map(radii, |&r| Ok(radius_sweep(&patches, &[r])?.entries[0]))?;
    let result = SweepResult::from_entries(entries)?;
    let mut out = OutputDir::create(out_dir, manifest)?;
    let json = serde_json::to_string_pretty(&result).expect("sweep serializes") + "\n";
    out.write("sweep.json", json.as_bytes())?;
    info!("best radius {} µm, AP50 {:.2}%", result.best_radius, result.best_ap50);
    Ok(out.finish()?)
}

pub fn report(ctx: &Context, inputs: &[PathBuf], out_dir: &Path) -> CliResult<()> {
    if inputs.is_empty() {
        return Err(CliError::Usage("report needs at least one evaluation report".into()));
    }
    let args: Vec<(String, String)> = inputs
        .iter()
        .enumerate()
        .map(|(i, p)| (format!("report.{i}"), path_arg(p)))
        .collect();
    let arg_refs: Vec<(&str, String)> = args.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    let mut manifest = ctx.manifest("report", &arg_refs);
    let mut reports = Vec::with_capacity(inputs.len());
    let mut seen = BTreeMap::new();
    for (i, p) in inputs.iter().enumerate() {
        let file = if p.is_dir() { p.join("report.json") } else { p.clone() };
        if !file.is_file() {
            return Err(CliError::Usage(format!("report {} not found", file.display())));
        }
        let text = fs::read_to_string(&file)?;
        manifest.add_input(format!("report.{i}"), text.as_bytes());
        let r = EvalReport::from_json(&text)?;
        if let Some(prev) = seen.insert(r.model.clone(), i) {
            warn!("model {:?} appears in reports {prev} and {i}", r.model);
        }
        reports.push(r);
    }
    let mut out = OutputDir::create(out_dir, manifest)?;
    out.write("report.txt", format_tables(&reports).as_bytes())?;
    Ok(out.finish()?)
}
