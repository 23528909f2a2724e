use serde::{Deserialize, Serialize};

use super::{CellInstance, Source};
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};

#[derive(Debug, Serialize, Deserialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    geometry: Geometry,
    /// QuPath places the nucleus ROI of a cell object next to `geometry`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nucleus_geometry: Option<Geometry>,
    #[serde(default)]
    properties: Properties,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Properties {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    object_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classification: Option<Classification>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nucleus_geometry: Option<Geometry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Classification {
    name: String,
}

fn polygon_geometry(p: &Polygon) -> Geometry {
    Geometry {
        kind: "Polygon".into(),
        coordinates: vec![p.closed_ring()],
    }
}

fn geometry_polygon(g: &Geometry) -> Result<Polygon> {
    if g.kind != "Polygon" {
        return Err(Error::InvalidPolygon(format!("unsupported geometry type {}", g.kind)));
    }
    let ring = g
        .coordinates
        .first()
        .ok_or_else(|| Error::InvalidPolygon("polygon without rings".into()))?;
    Polygon::new(ring.iter().map(|c| Point::new(c[0], c[1])).collect())
}

/// One FeatureCollection for one patch. Whole-cell instances become QuPath
/// cell objects (cell ring as `geometry`, nucleus ring as `nucleusGeometry`);
/// nucleus-only instances become detections. Rings are explicitly closed.
pub fn export_geojson(instances: &[CellInstance]) -> String {
    let features = instances
        .iter()
        .map(|inst| {
            let (geometry, nucleus_geometry, object_type, class) = match &inst.cell {
                Some(cell) => (
                    polygon_geometry(cell),
                    Some(polygon_geometry(&inst.nucleus)),
                    "cell",
                    "Cell",
                ),
                None => (polygon_geometry(&inst.nucleus), None, "detection", "Nucleus"),
            };
            Feature {
                kind: "Feature".into(),
                id: Some(inst.id),
                geometry,
                nucleus_geometry,
                properties: Properties {
                    object_type: Some(object_type.into()),
                    classification: Some(Classification { name: class.into() }),
                    confidence: inst.confidence,
                    nucleus_geometry: None,
                },
            }
        })
        .collect();
    serde_json::to_string(&FeatureCollection {
        kind: "FeatureCollection".into(),
        features,
    })
    .expect("GeoJSON structures serialize")
}

/// Reads a FeatureCollection written by [`export_geojson`] or by QuPath.
/// A nucleus ring may sit at the feature level or inside `properties`.
pub fn parse_geojson(text: &str, patch_id: &str, source: Source) -> Result<Vec<CellInstance>> {
    let fc: FeatureCollection =
        serde_json::from_str(text).map_err(|e| Error::from_json(e, text))?;
    if fc.kind != "FeatureCollection" {
        return Err(Error::Dataset(format!("expected FeatureCollection, got {}", fc.kind)));
    }
    fc.features
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let outer = geometry_polygon(&f.geometry)?;
            let nucleus = f
                .nucleus_geometry
                .as_ref()
                .or(f.properties.nucleus_geometry.as_ref());
            let id = f.id.unwrap_or(k as u64 + 1);
            let mut inst = match nucleus {
                Some(g) => CellInstance::whole_cell(id, geometry_polygon(g)?, outer, source),
                None => CellInstance::nucleus_only(id, outer, source),
            };
            inst.confidence = f.properties.confidence;
            inst.patch_id = patch_id.to_string();
            Ok(inst)
        })
        .collect()
}
