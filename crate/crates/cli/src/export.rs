use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use sg_sampling::geometry::Point2;
use sg_sampling::Graph;

pub fn json<T: Serialize + ?Sized>(value: &T) -> Result<String, String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| e.to_string())
}

pub fn csv<T: Serialize>(rows: &[T]) -> Result<String, String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| e.to_string())?;
    }
    let bytes = writer.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

pub fn emit(text: &str, output: Option<&Path>) -> Result<(), String> {
    match output {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| e.to_string())
        }
    }
}

const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;

fn project(p: Point2) -> (f64, f64) {
    let scale = SIZE - 2.0 * MARGIN;
    (MARGIN + scale * p.x, SIZE * 0.9 - MARGIN - scale * p.y)
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{h}" viewBox="0 0 {SIZE} {h}">"#,
        h = SIZE * 0.9
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

/// Diverging map: blue for negative, white at zero, red for positive.
fn color(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let fade = |v: f64| (255.0 * (1.0 - v)).round() as u8;
    let (r, g, b) = if t >= 0.0 {
        (255, fade(t), fade(t))
    } else {
        (fade(-t), fade(-t), 255)
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heat map of a vertex-graph function: each cell filled by its corner mean.
pub fn svg_function(graph: &Graph, values: &[f64]) -> String {
    let scale = values
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1e-300);
    let mut out = String::new();
    header(&mut out);
    for (corners, mean) in graph.cell_corners.iter().zip(graph.cell_means(values)) {
        let pts: Vec<String> = corners
            .iter()
            .map(|&p| {
                let (x, y) = project(graph.points[p]);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{}"/>"#,
            pts.join(" "),
            color(mean / scale)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Edges and vertices of a graph in the plane; boundary vertices in red.
pub fn svg_graph(graph: &Graph) -> String {
    let mut out = String::new();
    header(&mut out);
    for v in 0..graph.num_vertices() {
        let (x1, y1) = project(graph.position(v));
        for &w in graph.neighbors(v) {
            if v < w {
                let (x2, y2) = project(graph.position(w));
                let _ = writeln!(
                    out,
                    r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="black" stroke-width="1"/>"#
                );
            }
        }
    }
    for v in 0..graph.num_vertices() {
        let (x, y) = project(graph.position(v));
        let fill = if graph.is_boundary(v) { "red" } else { "black" };
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="{fill}"/>"#
        );
    }
    out.push_str("</svg>\n");
    out
}
