use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CellInstance, Source, DEFAULT_SCALE_UM_PER_PX};
use crate::error::{Error, Result};
use crate::geometry::Polygon;

#[derive(Debug, Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoImage {
    id: u64,
    file_name: String,
    width: usize,
    height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    patient_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    um_per_px: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    segmentation: Vec<Vec<f64>>,
    /// Nested form: a cell annotation carrying its own nucleus outline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nucleus_segmentation: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
    #[serde(default, skip_serializing)]
    score: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

/// One image entry of a COCO file, resolved to patch identity and scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDescriptor {
    pub image_id: u64,
    pub file_name: String,
    pub width: usize,
    pub height: usize,
    pub patient_id: String,
    pub patch_id: String,
    pub scale: f64,
}

impl PatchDescriptor {
    /// Derives ids from a `<patient_id>/<patch_id>.png` file name; an explicit
    /// patient id wins.
    pub fn from_file_name(
        image_id: u64,
        file_name: &str,
        width: usize,
        height: usize,
        patient_id: Option<String>,
        scale: Option<f64>,
    ) -> Self {
        let path = Path::new(file_name);
        let patch_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| file_name.to_string());
        let patient_id = patient_id.unwrap_or_else(|| {
            path.parent()
                .and_then(|p| p.file_name())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "unknown".to_string())
        });
        Self {
            image_id,
            file_name: file_name.to_string(),
            width,
            height,
            patient_id,
            patch_id,
            scale: scale.unwrap_or(DEFAULT_SCALE_UM_PER_PX),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseIssue {
    RejectedPolygon { annotation_id: u64, reason: String },
    UnknownCategory { annotation_id: u64, category_id: u64 },
    UnknownImage { annotation_id: u64, image_id: u64 },
    /// Nucleus centroid inside several cells, or a cell claimed by several nuclei.
    AmbiguousPairing { nucleus_id: u64, cell_ids: Vec<u64> },
    /// Cell annotation without a nucleus; it cannot form an instance.
    UnpairedCell { cell_id: u64 },
}

#[derive(Debug, Clone, Default)]
pub struct ParsedCoco {
    pub patches: Vec<PatchDescriptor>,
    pub instances: Vec<CellInstance>,
    pub issues: Vec<ParseIssue>,
}

impl ParsedCoco {
    /// `(nucleus instances, whole-cell instances)`.
    pub fn counts(&self) -> (usize, usize) {
        let cells = self.instances.iter().filter(|i| i.cell.is_some()).count();
        (self.instances.len(), cells)
    }

    pub fn instances_of<'a>(&'a self, patch_id: &'a str) -> impl Iterator<Item = &'a CellInstance> {
        self.instances.iter().filter(move |i| i.patch_id == patch_id)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Nucleus,
    Cell,
}

fn kind_of(name: &str) -> Option<Kind> {
    match name.trim().to_ascii_lowercase().as_str() {
        "nucleus" => Some(Kind::Nucleus),
        "cell" => Some(Kind::Cell),
        _ => None,
    }
}

fn polygon_from_segmentation(seg: &[Vec<f64>]) -> Result<Polygon> {
    // multi-part segmentations keep the largest valid part
    let mut best: Option<Polygon> = None;
    let mut last_err = None;
    for part in seg {
        match Polygon::from_flat(part) {
            Ok(p) => {
                if best.as_ref().is_none_or(|b| p.area() > b.area()) {
                    best = Some(p);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::InvalidPolygon("empty segmentation".into())))
}

/// Parses a COCO file with `nucleus` / `cell` categories.
///
/// Flat files are paired per image: a nucleus joins the cell polygon that
/// contains its centroid when that cell is the only candidate and no other
/// nucleus claims it. Ambiguities are reported, never guessed. Cell
/// annotations carrying `nucleus_segmentation` are taken as already paired.
/// `confidence` (or COCO-results `score`) is read as the detection score;
/// annotations with a score are tagged [`Source::Predicted`].
pub fn parse_coco(json_text: &str) -> Result<ParsedCoco> {
    let file: CocoFile =
        serde_json::from_str(json_text).map_err(|e| Error::from_json(e, json_text))?;

    let kinds: HashMap<u64, Kind> = file
        .categories
        .iter()
        .filter_map(|c| kind_of(&c.name).map(|k| (c.id, k)))
        .collect();
    let patches: Vec<PatchDescriptor> = file
        .images
        .iter()
        .map(|im| {
            PatchDescriptor::from_file_name(
                im.id,
                &im.file_name,
                im.width,
                im.height,
                im.patient_id.clone(),
                im.um_per_px,
            )
        })
        .collect();
    let patch_of: HashMap<u64, &PatchDescriptor> =
        patches.iter().map(|p| (p.image_id, p)).collect();

    let mut issues = Vec::new();
    // per image, in file order
    let mut nuclei: Vec<Vec<(u64, Polygon, Option<f64>)>> = vec![Vec::new(); patches.len()];
    let mut cells: Vec<Vec<(u64, Polygon, Option<f64>)>> = vec![Vec::new(); patches.len()];
    let mut nested: Vec<(usize, CellInstance)> = Vec::new();
    let image_pos: HashMap<u64, usize> = patches
        .iter()
        .enumerate()
        .map(|(i, p)| (p.image_id, i))
        .collect();

    for ann in &file.annotations {
        let Some(&kind) = kinds.get(&ann.category_id) else {
            issues.push(ParseIssue::UnknownCategory {
                annotation_id: ann.id,
                category_id: ann.category_id,
            });
            continue;
        };
        let Some(&pos) = image_pos.get(&ann.image_id) else {
            issues.push(ParseIssue::UnknownImage {
                annotation_id: ann.id,
                image_id: ann.image_id,
            });
            continue;
        };
        let poly = match polygon_from_segmentation(&ann.segmentation) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("annotation {} rejected: {e}", ann.id);
                issues.push(ParseIssue::RejectedPolygon {
                    annotation_id: ann.id,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let confidence = ann.confidence.or(ann.score);
        match (kind, &ann.nucleus_segmentation) {
            (Kind::Cell, Some(nseg)) => match polygon_from_segmentation(nseg) {
                Ok(nucleus) => {
                    let source = if confidence.is_some() { Source::Predicted } else { Source::Gold };
                    let mut inst = CellInstance::whole_cell(ann.id, nucleus, poly, source);
                    inst.confidence = confidence;
                    inst.patch_id = patch_of[&ann.image_id].patch_id.clone();
                    nested.push((pos, inst));
                }
                Err(e) => issues.push(ParseIssue::RejectedPolygon {
                    annotation_id: ann.id,
                    reason: format!("nucleus: {e}"),
                }),
            },
            (Kind::Cell, None) => cells[pos].push((ann.id, poly, confidence)),
            (Kind::Nucleus, _) => nuclei[pos].push((ann.id, poly, confidence)),
        }
    }

    let mut instances = Vec::new();
    for (pos, patch) in patches.iter().enumerate() {
        let image_cells = &cells[pos];
        let candidates: Vec<Vec<usize>> = nuclei[pos]
            .iter()
            .map(|(_, n, _)| {
                let c = n.centroid();
                image_cells
                    .iter()
                    .enumerate()
                    .filter(|(_, (_, cell, _))| cell.contains(c))
                    .map(|(k, _)| k)
                    .collect()
            })
            .collect();
        let mut claims = vec![0usize; image_cells.len()];
        for cand in &candidates {
            if cand.len() == 1 {
                claims[cand[0]] += 1;
            }
        }
        let mut used = vec![false; image_cells.len()];
        for ((id, nucleus, conf), cand) in nuclei[pos].iter().zip(&candidates) {
            let source = if conf.is_some() { Source::Predicted } else { Source::Gold };
            let mut inst = CellInstance::nucleus_only(*id, nucleus.clone(), source);
            inst.confidence = *conf;
            inst.patch_id = patch.patch_id.clone();
            match cand.as_slice() {
                [] => {}
                [k] if claims[*k] == 1 => {
                    inst.cell = Some(image_cells[*k].1.clone());
                    if inst.confidence.is_none() {
                        inst.confidence = image_cells[*k].2;
                    }
                    used[*k] = true;
                }
                _ => {
                    let cell_ids: Vec<u64> = cand.iter().map(|&k| image_cells[k].0).collect();
                    log::warn!("nucleus {id}: ambiguous pairing with cells {cell_ids:?}");
                    issues.push(ParseIssue::AmbiguousPairing {
                        nucleus_id: *id,
                        cell_ids,
                    });
                }
            }
            instances.push(inst);
        }
        for (k, (cell_id, _, _)) in image_cells.iter().enumerate() {
            if !used[k] {
                log::warn!("cell {cell_id} has no uniquely paired nucleus");
                issues.push(ParseIssue::UnpairedCell { cell_id: *cell_id });
            }
        }
        instances.extend(
            nested
                .iter()
                .filter(|(p, _)| *p == pos)
                .map(|(_, inst)| inst.clone()),
        );
    }

    Ok(ParsedCoco {
        patches,
        instances,
        issues,
    })
}

#[derive(Serialize)]
struct CocoOut<'a> {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: &'a [CocoCategory],
}

const NUCLEUS_CATEGORY: u64 = 1;
const CELL_CATEGORY: u64 = 2;

/// Writes instances as COCO JSON. Whole-cell instances use the nested form
/// (`cell` category plus `nucleus_segmentation`) so pairing survives a round
/// trip exactly; nucleus-only instances use the `nucleus` category.
pub fn export_coco(patches: &[PatchDescriptor], instances: &[CellInstance]) -> String {
    let categories = [
        CocoCategory {
            id: NUCLEUS_CATEGORY,
            name: "nucleus".into(),
        },
        CocoCategory {
            id: CELL_CATEGORY,
            name: "cell".into(),
        },
    ];
    let image_of: HashMap<&str, u64> = patches
        .iter()
        .map(|p| (p.patch_id.as_str(), p.image_id))
        .collect();
    let images = patches
        .iter()
        .map(|p| CocoImage {
            id: p.image_id,
            file_name: p.file_name.clone(),
            width: p.width,
            height: p.height,
            patient_id: Some(p.patient_id.clone()),
            um_per_px: Some(p.scale),
        })
        .collect();
    let annotations = instances
        .iter()
        .filter_map(|inst| {
            let image_id = *image_of.get(inst.patch_id.as_str())?;
            Some(match &inst.cell {
                Some(cell) => CocoAnnotation {
                    id: inst.id,
                    image_id,
                    category_id: CELL_CATEGORY,
                    segmentation: vec![cell.to_flat()],
                    nucleus_segmentation: Some(vec![inst.nucleus.to_flat()]),
                    confidence: inst.confidence,
                    score: None,
                },
                None => CocoAnnotation {
                    id: inst.id,
                    image_id,
                    category_id: NUCLEUS_CATEGORY,
                    segmentation: vec![inst.nucleus.to_flat()],
                    nucleus_segmentation: None,
                    confidence: inst.confidence,
                    score: None,
                },
            })
        })
        .collect();
    serde_json::to_string_pretty(&CocoOut {
        images,
        annotations,
        categories: &categories,
    })
    .expect("COCO structures serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64, s: f64) -> String {
        format!("[{x},{y},{},{y},{},{},{x},{}]", x + s, x + s, y + s, y + s)
    }

    fn file(annotations: &str) -> String {
        format!(
            r#"{{"images":[{{"id":7,"file_name":"P01/patch_3.png","width":256,"height":256}}],
               "categories":[{{"id":11,"name":"Cell"}},{{"id":12,"name":"NUCLEUS"}}],
               "annotations":[{annotations}]}}"#
        )
    }

    #[test]
    fn empty_annotations() {
        let parsed = parse_coco(&file("")).unwrap();
        assert_eq!(parsed.counts(), (0, 0));
        assert!(parsed.issues.is_empty());
        assert_eq!(parsed.patches[0].patient_id, "P01");
        assert_eq!(parsed.patches[0].patch_id, "patch_3");
        assert_eq!(parsed.patches[0].scale, 0.5);
    }

    #[test]
    fn nucleus_in_cell_is_paired() {
        let anns = format!(
            r#"{{"id":1,"image_id":7,"category_id":12,"segmentation":[{}]}},
               {{"id":2,"image_id":7,"category_id":11,"segmentation":[{}]}}"#,
            square(40.0, 40.0, 10.0),
            square(30.0, 30.0, 30.0)
        );
        let parsed = parse_coco(&file(&anns)).unwrap();
        assert_eq!(parsed.counts(), (1, 1));
        let inst = &parsed.instances[0];
        assert_eq!(inst.id, 1);
        assert_eq!(inst.cell.as_ref().unwrap().area(), 900.0);
        assert_eq!(inst.source, Source::Gold);
    }

    #[test]
    fn ambiguous_pairing_is_reported_not_guessed() {
        let anns = format!(
            r#"{{"id":1,"image_id":7,"category_id":12,"segmentation":[{}]}},
               {{"id":2,"image_id":7,"category_id":11,"segmentation":[{}]}},
               {{"id":3,"image_id":7,"category_id":11,"segmentation":[{}]}}"#,
            square(40.0, 40.0, 10.0),
            square(30.0, 30.0, 30.0),
            square(35.0, 35.0, 30.0)
        );
        let parsed = parse_coco(&file(&anns)).unwrap();
        assert_eq!(parsed.counts(), (1, 0));
        assert!(parsed.issues.contains(&ParseIssue::AmbiguousPairing {
            nucleus_id: 1,
            cell_ids: vec![2, 3]
        }));
        assert!(parsed.issues.contains(&ParseIssue::UnpairedCell { cell_id: 2 }));
    }

    #[test]
    fn self_intersecting_polygon_is_rejected_by_id() {
        let anns = r#"{"id":9,"image_id":7,"category_id":12,"segmentation":[[0,0,10,10,10,0,0,10]]}"#;
        let parsed = parse_coco(&file(anns)).unwrap();
        assert_eq!(parsed.counts(), (0, 0));
        assert!(matches!(
            parsed.issues[0],
            ParseIssue::RejectedPolygon { annotation_id: 9, .. }
        ));
    }

    #[test]
    fn malformed_json_reports_offset() {
        let text = r#"{"images": [}"#;
        match parse_coco(text) {
            Err(Error::Json { offset, .. }) => assert_eq!(offset, 12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nested_export_round_trips_with_confidence() {
        let parsed = parse_coco(&file(&format!(
            r#"{{"id":1,"image_id":7,"category_id":12,"segmentation":[{}]}},
               {{"id":2,"image_id":7,"category_id":11,"segmentation":[{}]}},
               {{"id":5,"image_id":7,"category_id":12,"segmentation":[{}],"confidence":0.25}}"#,
            square(40.0, 40.0, 10.0),
            square(30.0, 30.0, 30.0),
            square(100.5, 100.25, 7.125)
        )))
        .unwrap();
        let text = export_coco(&parsed.patches, &parsed.instances);
        let back = parse_coco(&text).unwrap();
        assert_eq!(back.instances.len(), 2);
        let cell = back.instances.iter().find(|i| i.id == 1).unwrap();
        assert_eq!(cell.cell, parsed.instances[0].cell);
        assert_eq!(cell.nucleus, parsed.instances[0].nucleus);
        let det = back.instances.iter().find(|i| i.id == 5).unwrap();
        assert_eq!(det.confidence, Some(0.25));
        assert_eq!(det.source, Source::Predicted);
        assert_eq!(back.patches, parsed.patches);
    }
}
