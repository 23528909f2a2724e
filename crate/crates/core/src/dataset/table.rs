use crate::error::{Error, Result};
use crate::morphometry::{FeatureRecord, FEATURE_NAMES};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub instance_id: u64,
    pub patch_id: String,
    pub record: FeatureRecord,
}

/// CSV with columns `instance_id, patch_id` followed by the 17 feature names.
pub fn export_feature_csv(rows: &[FeatureRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["instance_id", "patch_id"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header)?;
    for row in rows {
        let mut fields = vec![row.instance_id.to_string(), row.patch_id.clone()];
        // `Display` for f64 never emits exponents or digit grouping
        fields.extend(row.record.values().iter().map(|v| v.to_string()));
        w.write_record(&fields)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn parse_feature_csv(text: &str) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.len() != 19 || header.iter().skip(2).ne(FEATURE_NAMES) {
        return Err(Error::Dataset("unexpected feature CSV header".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Dataset(format!("bad number {:?} in column {i}", &rec[i])))
        };
        let mut v = [0.0; 17];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = num(k + 2)?;
        }
        rows.push(FeatureRow {
            instance_id: rec[0]
                .parse()
                .map_err(|_| Error::Dataset(format!("bad instance id {:?}", &rec[0])))?,
            patch_id: rec[1].to_string(),
            record: FeatureRecord::from_values(v),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphometry::ChannelStats;

    fn sample() -> FeatureRow {
        let c = ChannelStats {
            median: 0.28,
            mean: 0.31,
            std: 0.14,
            max: 0.88,
            min: -0.04,
        };
        FeatureRow {
            instance_id: 12,
            patch_id: "patch, \"a\"".into(),
            record: FeatureRecord {
                area: 202.1,
                perimeter: 62.21,
                circularity: 0.68,
                solidity: 0.94,
                max_diameter: 23.16,
                min_diameter: 12.54,
                nucleus_to_cell_ratio: 0.3,
                h: c,
                e: c,
            },
        }
    }

    #[test]
    fn header_only_for_no_records() {
        let text = export_feature_csv(&[]).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 19);
        assert!(text.starts_with("instance_id,patch_id,area_um2,perimeter_um,"));
    }

    #[test]
    fn one_record_two_lines_with_rfc4180_quoting() {
        let text = export_feature_csv(&[sample()]).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"patch, \"\"a\"\"\""));
        let back = parse_feature_csv(&text).unwrap();
        assert_eq!(back, vec![sample()]);
    }

    #[test]
    fn large_values_have_no_grouping_or_exponent() {
        let mut row = sample();
        row.record.area = 1234567.5;
        row.record.h.min = 1e-7;
        let text = export_feature_csv(&[row]).unwrap();
        assert!(text.contains(",1234567.5,"));
        assert!(text.contains(",0.0000001,"));
    }
}
