//! Static SVG plots of a simulation record.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::sim::SimulationRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    States,
    Controls,
    Events,
    Psi,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [PlotKind::States, PlotKind::Controls, PlotKind::Events, PlotKind::Psi];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::States => "states",
            PlotKind::Controls => "controls",
            PlotKind::Events => "events",
            PlotKind::Psi => "psi",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.svg", self.name())
    }
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("nothing to plot for {0}")]
    EmptySeries(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 200.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 40.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// Linear map from data to panel pixels.
struct Frame {
    t0: f64,
    t1: f64,
    y0: f64,
    y1: f64,
    top: f64,
}

impl Frame {
    fn px(&self, t: f64) -> f64 {
        let span = (self.t1 - self.t0).max(f64::MIN_POSITIVE);
        MARGIN_LEFT + (t - self.t0) / span * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let inner = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        self.top + MARGIN_TOP + (self.y1 - y) / (self.y1 - self.y0) * inner
    }

    fn bottom(&self) -> f64 {
        self.top + PANEL_HEIGHT - MARGIN_BOTTOM
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.1 };
    (lo - pad, hi + pad)
}

fn axes(svg: &mut String, f: &Frame, title: &str, ylabel: &str, yticks: bool) {
    let (l, r) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (top, bottom) = (f.top + MARGIN_TOP, f.bottom());
    writeln!(
        svg,
        r##"<rect x="{l:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000"/>"##,
        r - l,
        bottom - top
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{title}</text>"#,
        (l + r) / 2.0,
        f.top + 18.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">t (s)</text>"#,
        (l + r) / 2.0,
        bottom + 32.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="14" y="{y:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {y:.2})">{ylabel}</text>"#,
        y = (top + bottom) / 2.0
    )
    .unwrap();
    for k in 0..=4 {
        let t = f.t0 + (f.t1 - f.t0) * k as f64 / 4.0;
        writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
            f.px(t),
            bottom + 14.0,
            tick(t)
        )
        .unwrap();
    }
    if yticks {
        for k in 0..=2 {
            let y = f.y0 + (f.y1 - f.y0) * k as f64 / 2.0;
            writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#,
                l - 4.0,
                f.py(y) + 3.0,
                tick(y)
            )
            .unwrap();
        }
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn tsf_marker(svg: &mut String, f: &Frame, t_sf: Option<f64>) {
    if let Some(t) = t_sf {
        let x = f.px(t);
        writeln!(
            svg,
            r##"<line class="t-sf" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000" stroke-width="1.5"/>"##,
            f.top + MARGIN_TOP,
            f.bottom()
        )
        .unwrap();
    }
}

fn polyline(svg: &mut String, f: &Frame, times: &[f64], ys: impl Iterator<Item = f64>, colour: &str) {
    let mut pts = String::new();
    for (t, y) in times.iter().zip(ys) {
        write!(pts, "{:.2},{:.2} ", f.px(*t), f.py(y)).unwrap();
    }
    writeln!(
        svg,
        r#"<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{}"/>"#,
        pts.trim_end()
    )
    .unwrap();
}

fn document(panels: usize, body: String) -> String {
    let height = PANEL_HEIGHT * panels as f64;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n{body}</svg>\n"
    )
}

fn component_panels(rec: &SimulationRecord, series: &[nalgebra::DVector<f64>], symbol: &str) -> String {
    let (n, d) = (rec.n, rec.d);
    let t1 = rec.times.last().copied().unwrap_or(0.0).max(rec.t_end);
    let mut body = String::new();
    for k in 0..d {
        let (y0, y1) = padded_range(series.iter().flat_map(|v| (0..n).map(move |i| v[i * d + k])));
        let f = Frame {
            t0: 0.0,
            t1,
            y0,
            y1,
            top: PANEL_HEIGHT * k as f64,
        };
        let label = format!("{symbol}_i{}", k + 1);
        axes(&mut body, &f, &format!("component {}", k + 1), &label, true);
        for i in 0..n {
            polyline(&mut body, &f, &rec.times, series.iter().map(|v| v[i * d + k]), PALETTE[i % PALETTE.len()]);
        }
        tsf_marker(&mut body, &f, rec.t_sf);
    }
    document(d, body)
}

fn psi_panel(rec: &SimulationRecord) -> String {
    let t1 = rec.times.last().copied().unwrap_or(0.0).max(rec.t_end);
    let (y0, y1) = padded_range(rec.psi.iter().flat_map(|v| v.iter().copied()));
    let f = Frame {
        t0: 0.0,
        t1,
        y0,
        y1,
        top: 0.0,
    };
    let mut body = String::new();
    axes(&mut body, &f, "auxiliary variables", "psi_i", true);
    for i in 0..rec.n {
        polyline(&mut body, &f, &rec.times, rec.psi.iter().map(|v| v[i]), PALETTE[i % PALETTE.len()]);
    }
    tsf_marker(&mut body, &f, rec.t_sf);
    document(1, body)
}

fn event_raster(rec: &SimulationRecord) -> String {
    let n = rec.n;
    let t1 = rec.times.last().copied().unwrap_or(0.0).max(rec.t_end);
    // rows are agents 1..n from top to bottom
    let f = Frame {
        t0: 0.0,
        t1,
        y0: 0.5,
        y1: n as f64 + 0.5,
        top: 0.0,
    };
    let mut body = String::new();
    axes(&mut body, &f, "event times", "agent", false);
    for i in 0..n {
        let y = f.py((n - i) as f64);
        writeln!(
            body,
            r#"<text class="row" x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#,
            MARGIN_LEFT - 4.0,
            y + 3.0,
            i + 1
        )
        .unwrap();
        let colour = PALETTE[i % PALETTE.len()];
        let half = 0.35 * (f.py(0.0) - f.py(1.0));
        let mut path = String::new();
        for t in rec.agent_events(i) {
            let x = f.px(t);
            write!(path, "M{x:.2},{:.2}V{:.2}", y - half, y + half).unwrap();
        }
        if !path.is_empty() {
            writeln!(body, r#"<path d="{path}" stroke="{colour}" stroke-width="0.8"/>"#).unwrap();
        }
    }
    tsf_marker(&mut body, &f, rec.t_sf);
    document(1, body)
}

/// SVG text for one kind of plot.
pub fn render_svg(rec: &SimulationRecord, kind: PlotKind) -> Result<String, PlotError> {
    let empty = match kind {
        PlotKind::States => rec.states.is_empty(),
        PlotKind::Controls => rec.controls.is_empty(),
        PlotKind::Events => rec.events.is_empty(),
        PlotKind::Psi => rec.psi.is_empty(),
    };
    if empty || rec.is_empty() {
        return Err(PlotError::EmptySeries(kind.name()));
    }
    Ok(match kind {
        PlotKind::States => component_panels(rec, &rec.states, "x"),
        PlotKind::Controls => component_panels(rec, &rec.controls, "u"),
        PlotKind::Events => event_raster(rec),
        PlotKind::Psi => psi_panel(rec),
    })
}

pub fn render_plot(rec: &SimulationRecord, kind: PlotKind, out_path: &Path) -> Result<(), PlotError> {
    let svg = render_svg(rec, kind)?;
    fs::write(out_path, svg)?;
    Ok(())
}
