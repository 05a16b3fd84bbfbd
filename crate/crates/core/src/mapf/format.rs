//! Text formats for maps and scenarios.
//!
//! Map: first line `height width`, then `height` rows of `width` characters
//! (`.` free, `@` obstacle), row 0 being `y = 0`. Scenario: one line per
//! agent, `agent_id sx sy gx gy`, ids consecutive from 0.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mapf::grid::{Cell, GridMap, Instance};

pub fn map_to_string(grid: &GridMap) -> String {
    let mut out = format!("{} {}\n", grid.height(), grid.width());
    for row in grid.render_rows() {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn parse_map(text: &str, path: &Path) -> Result<GridMap> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| err(1, format!("bad dimension {s:?}"))))
        .collect::<Result<_>>()?;
    let [height, width] = dims[..] else {
        return Err(err(1, "header must be `height width`".into()));
    };
    let rows: Vec<&str> = lines.take(height).collect();
    if rows.len() != height {
        return Err(err(rows.len() + 2, format!("expected {height} rows")));
    }
    for (k, row) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(err(k + 2, format!("expected {width} characters")));
        }
    }
    GridMap::from_rows(&rows).map_err(|e| err(0, e.to_string()))
}

pub fn scenario_to_string(instance: &Instance) -> String {
    let mut out = String::new();
    for (i, (s, g)) in instance.starts.iter().zip(&instance.goals).enumerate() {
        writeln!(out, "{i} {} {} {} {}", s.x, s.y, g.x, g.y).unwrap();
    }
    out
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<(Vec<Cell>, Vec<Cell>)> {
    let mut starts = Vec::new();
    let mut goals = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            message,
        };
        let nums: Vec<i64> = line
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| err(format!("bad number {s:?}"))))
            .collect::<Result<_>>()?;
        let [id, sx, sy, gx, gy] = nums[..] else {
            return Err(err("expected `agent_id sx sy gx gy`".into()));
        };
        if id != starts.len() as i64 {
            return Err(err(format!("expected agent id {}", starts.len())));
        }
        let cell = |x: i64, y: i64| -> Result<Cell> {
            Ok(Cell::new(
                i32::try_from(x).map_err(|_| err("coordinate overflow".into()))?,
                i32::try_from(y).map_err(|_| err("coordinate overflow".into()))?,
            ))
        };
        starts.push(cell(sx, sy)?);
        goals.push(cell(gx, gy)?);
    }
    Ok((starts, goals))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_instance(map: &Path, scenario: &Path) -> Result<Instance> {
    let grid = parse_map(&read_text(map)?, map)?;
    let (starts, goals) = parse_scenario(&read_text(scenario)?, scenario)?;
    Instance::new(grid, starts, goals)
}
