use std::fs;
use std::path::Path;

use super::{Fleet, FleetError};

/// Writes the canonical JSON snapshot. Collections are sorted by id in the
/// in-memory model, so equal fleets produce byte-identical files.
pub fn save_fleet(fleet: &Fleet, path: impl AsRef<Path>) -> Result<(), FleetError> {
    let mut text = fleet.to_json();
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_fleet(path: impl AsRef<Path>) -> Result<Fleet, FleetError> {
    let text = fs::read_to_string(path)?;
    parse_fleet(&text)
}

pub fn parse_fleet(text: &str) -> Result<Fleet, FleetError> {
    let fleet: Fleet = serde_json::from_str(text).map_err(|e| FleetError::Format {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    fleet.validate()?;
    Ok(fleet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::{generate_fleet, FleetParams};

    fn fleet() -> Fleet {
        generate_fleet(&FleetParams {
            n_packages: 15,
            n_owners: 4,
            n_cells: 3,
            ..FleetParams::default()
        })
        .unwrap()
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.json");
        let f = fleet();
        save_fleet(&f, &path).unwrap();
        let back = load_fleet(&path).unwrap();
        assert_eq!(back, f);
        let first = fs::read(&path).unwrap();
        save_fleet(&back, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn truncated_file_is_format_error() {
        let text = fleet().to_json();
        let cut = &text[..text.len() / 2];
        match parse_fleet(cut) {
            Err(FleetError::Format { line, .. }) => assert!(line > 0),
            other => panic!("expected FormatError, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_reports_field_name() {
        let err = parse_fleet(r#"{"seed": 1, "clock_day": 0, "owners": [], "cells": []}"#).unwrap_err();
        assert!(err.to_string().contains("packages"), "{err}");
    }

    #[test]
    fn zero_jobs_round_trips() {
        let mut f = fleet();
        f.jobs.clear();
        let back = parse_fleet(&f.to_json()).unwrap();
        assert_eq!(back, f);
    }
}
