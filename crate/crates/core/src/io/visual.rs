//! CSV ingestion of externally matched 2D visual features.
//!
//! Format: UTF-8, `.` decimal, header `u0,v0,u1,v1,score`, one match per
//! line. The score column is optional and defaults to 1.0.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rgbd::PixelMatch;

pub fn read_visual_matches(path: &Path) -> Result<Vec<PixelMatch>> {
    let text = fs::read_to_string(path)?;
    let loc = |line: usize| format!("{}:{}", path.display(), line);

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(loc(1), "empty file (missing header)"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let has_score = match columns.as_slice() {
        ["u0", "v0", "u1", "v1"] => false,
        ["u0", "v0", "u1", "v1", "score"] => true,
        _ => {
            return Err(Error::parse(
                loc(1),
                format!("expected header 'u0,v0,u1,v1[,score]', found '{header}'"),
            ))
        }
    };

    let mut matches = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = if has_score { 5 } else { 4 };
        if fields.len() != expected {
            return Err(Error::parse(
                loc(line_no),
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let mut values = [0.0f64; 5];
        values[4] = 1.0;
        for (i, field) in fields.iter().enumerate() {
            values[i] = field.parse().map_err(|_| {
                Error::parse(loc(line_no), format!("invalid number '{field}'"))
            })?;
        }
        if values[4] < 0.0 {
            return Err(Error::parse(loc(line_no), "score must be non-negative"));
        }
        matches.push(PixelMatch {
            u0: values[0],
            v0: values[1],
            u1: values[2],
            v1: values[3],
            score: values[4],
        });
    }
    Ok(matches)
}

pub fn write_visual_matches(matches: &[PixelMatch], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "u0,v0,u1,v1,score")?;
    for m in matches {
        writeln!(out, "{},{},{},{},{}", m.u0, m.v0, m.u1, m.v1, m.score)?;
    }
    fs::write(path, out)?;
    Ok(())
}
