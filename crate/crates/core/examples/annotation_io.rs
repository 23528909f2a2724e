//! Writes a small synthetic dataset, reads its COCO annotations back,
//! exports one patch as GeoJSON and draws the patient-disjoint split.

use cytobench::dataset::{
    export_geojson, parse_coco, parse_geojson, split_by_patient, Source, ANNOTATIONS_FILE,
    DEFAULT_FRACTIONS,
};
use cytobench::synthetic::{write_dataset, SyntheticSpec};

fn main() -> cytobench::Result<()> {
    let dir = std::env::temp_dir().join("cytobench_annotation_io");
    let spec = SyntheticSpec {
        width: 96,
        height: 96,
        cells: 6,
        ..SyntheticSpec::default()
    };
    write_dataset(&dir, &spec, 7, 2, 42)?;

    let parsed = parse_coco(&std::fs::read_to_string(dir.join(ANNOTATIONS_FILE))?)?;
    let (nuclei, cells) = parsed.counts();
    println!("{} patches, {nuclei} nuclei, {cells} whole cells, {} issues", parsed.patches.len(), parsed.issues.len());

    let first = &parsed.patches[0].patch_id;
    let instances: Vec<_> = parsed.instances_of(first).cloned().collect();
    let geojson = export_geojson(&instances);
    let back = parse_geojson(&geojson, first, Source::Gold)?;
    println!("{first}: {} instances, GeoJSON round trip equal: {}", instances.len(), back == instances);

    let split = split_by_patient(&parsed.patches, DEFAULT_FRACTIONS, 0)?;
    println!("train {:?}\nvalidation {:?}\ntest {:?}", split.train, split.validation, split.test);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
