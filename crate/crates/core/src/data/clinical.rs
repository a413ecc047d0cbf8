use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed interval of a clinical scale with its reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub label: String,
}

/// Clinical interpretation bands per scale name.
///
/// Adjacent bands either share an endpoint (continuous scales such as BMI)
/// or leave a gap of at most one unit (integer questionnaire scores).
/// A value between two integer bands reads as the lower one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClinicalBands(pub BTreeMap<String, Vec<Band>>);

fn band(lo: f64, hi: f64, label: &str) -> Band {
    Band { lo, hi, label: label.to_string() }
}

impl Default for ClinicalBands {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        m.insert(
            "ISI".to_string(),
            vec![
                band(0.0, 7.0, "no clinically significant insomnia"),
                band(8.0, 14.0, "subthreshold insomnia"),
                band(15.0, 21.0, "moderate clinical insomnia"),
                band(22.0, 28.0, "severe clinical insomnia"),
            ],
        );
        m.insert(
            "ESS".to_string(),
            vec![band(0.0, 10.0, "normal daytime sleepiness"), band(11.0, 24.0, "excessive daytime sleepiness")],
        );
        m.insert(
            "PHQ9".to_string(),
            vec![
                band(0.0, 4.0, "minimal depression"),
                band(5.0, 9.0, "mild depression"),
                band(10.0, 14.0, "moderate depression"),
                band(15.0, 19.0, "moderately severe depression"),
                band(20.0, 27.0, "severe depression"),
            ],
        );
        m.insert(
            "BMI".to_string(),
            vec![
                band(0.0, 18.5, "underweight"),
                band(18.5, 25.0, "normal weight"),
                band(25.0, 30.0, "overweight"),
                band(30.0, 100.0, "obese"),
            ],
        );
        m.insert(
            "ANX".to_string(),
            vec![band(0.0, 2.0, "no significant anxiety"), band(3.0, 6.0, "probable anxiety disorder")],
        );
        ClinicalBands(m)
    }
}

impl ClinicalBands {
    pub fn validate(&self) -> Result<()> {
        for (scale, bands) in &self.0 {
            if bands.is_empty() {
                return Err(Error::Config(format!("clinical scale `{scale}` has no bands")));
            }
            for b in bands {
                if !(b.lo <= b.hi) {
                    return Err(Error::Config(format!("band `{}` of `{scale}` has lo > hi", b.label)));
                }
            }
            for w in bands.windows(2) {
                let gap = w[1].lo - w[0].hi;
                if !(0.0..=1.0).contains(&gap) {
                    return Err(Error::Config(format!(
                        "bands `{}` and `{}` of `{scale}` overlap or leave a gap",
                        w[0].label, w[1].label
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn label(&self, scale: &str, value: f64) -> Option<&str> {
        let bands = self.0.get(scale)?;
        let first = bands.first()?;
        let last = bands.last()?;
        if !(value >= first.lo && value <= last.hi) {
            return None;
        }
        bands.iter().rev().find(|b| b.lo <= value).map(|b| b.label.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ClinicalBands::default().validate().unwrap();
    }

    #[test]
    fn lookups() {
        let b = ClinicalBands::default();
        assert_eq!(b.label("ISI", 13.12), Some("subthreshold insomnia"));
        assert_eq!(b.label("ISI", 17.44), Some("moderate clinical insomnia"));
        assert_eq!(b.label("ISI", 7.5), Some("no clinically significant insomnia"));
        assert_eq!(b.label("PHQ9", 13.25), Some("moderate depression"));
        assert_eq!(b.label("BMI", 18.5), Some("normal weight"));
        assert_eq!(b.label("ESS", 30.0), None);
        assert_eq!(b.label("XYZ", 1.0), None);
    }

    #[test]
    fn overlap_rejected() {
        let mut m = BTreeMap::new();
        m.insert("S".into(), vec![band(0.0, 5.0, "a"), band(4.0, 9.0, "b")]);
        assert!(ClinicalBands(m).validate().is_err());
        let mut m = BTreeMap::new();
        m.insert("S".into(), vec![band(0.0, 5.0, "a"), band(8.0, 9.0, "b")]);
        assert!(ClinicalBands(m).validate().is_err());
    }
}
