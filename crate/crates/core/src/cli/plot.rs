//! SVG rendering of the CSV tables written by `chebsolve` and `run`.

use super::CliError;
use plotters::coord::ranged1d::{AsRangedCoord, ValueFormatter};
use plotters::prelude::*;

type Series = (String, Vec<(f64, f64)>);

fn columns(csv_text: &str, x: &str, ys: &[&str]) -> Result<Vec<Series>, CliError> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let header = rdr.headers().map_err(|e| CliError::Numerical(format!("unreadable CSV: {e}")))?.clone();
    let idx = |name: &str| header.iter().position(|h| h == name);
    let xi = idx(x).ok_or_else(|| CliError::Numerical(format!("CSV has no `{x}` column")))?;
    let mut out: Vec<Series> = ys.iter().map(|y| (y.to_string(), Vec::new())).collect();
    let yi: Vec<Option<usize>> = ys.iter().map(|y| idx(y)).collect();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Numerical(format!("unreadable CSV row: {e}")))?;
        let Ok(xv) = rec[xi].parse::<f64>() else { continue };
        for (series, col) in out.iter_mut().zip(&yi) {
            if let Some(v) = col.and_then(|c| rec[c].parse::<f64>().ok()) {
                series.1.push((xv, v));
            }
        }
    }
    out.retain(|s| !s.1.is_empty());
    Ok(out)
}

fn extent(vals: impl Iterator<Item = f64>, positive: bool) -> Option<(f64, f64)> {
    let (lo, hi) = vals
        .filter(|v| v.is_finite() && (!positive || *v > 0.0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    Some(if lo == hi { (lo - 0.5 * lo.abs().max(1.0), hi + 0.5 * hi.abs().max(1.0)) } else { (lo, hi) })
}

fn draw<X, Y>(series: &[Series], title: &str, (xd, yd): (&str, &str), xr: X, yr: Y) -> Result<String, String>
where
    X: AsRangedCoord<Value = f64>,
    Y: AsRangedCoord<Value = f64>,
    X::CoordDescType: ValueFormatter<f64>,
    Y::CoordDescType: ValueFormatter<f64>,
{
    let mut buf = String::new();
    {
        let root = SVGBackend::with_string(&mut buf, (900, 560)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| e.to_string())?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(80)
            .build_cartesian_2d(xr, yr)
            .map_err(|e| e.to_string())?;
        chart.configure_mesh().x_desc(xd).y_desc(yd).draw().map_err(|e| e.to_string())?;
        for (i, (name, pts)) in series.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            chart
                .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
                .map_err(|e| e.to_string())?
                .label(name.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .map_err(|e| e.to_string())?;
        root.present().map_err(|e| e.to_string())?;
    }
    Ok(buf)
}

/// SVG for the table produced by `kind`, or `None` if that command has no plot.
pub fn render(kind: &str, csv_text: &str) -> Result<Option<String>, CliError> {
    let fail = |e: String| CliError::Numerical(format!("plot failed: {e}"));
    match kind {
        "chebsolve" => {
            let ys = ["rho_tilde_lp", "lemma2_bound", "prop5_bound", "lemma1_chord", "proj_bound", "rho_star", "rho_pow_k"];
            let s = columns(csv_text, "C", &ys)?;
            let Some((x0, x1)) = extent(s.iter().flat_map(|s| s.1.iter().map(|p| p.0)), true) else { return Ok(None) };
            let Some((y0, y1)) = extent(s.iter().flat_map(|s| s.1.iter().map(|p| p.1)), false) else { return Ok(None) };
            let pad = 0.05 * (y1 - y0);
            draw(&s, "constrained Chebyshev value and bounds", ("C", "rate"), (x0..x1).log_scale(), (y0 - pad)..(y1 + pad))
                .map(Some)
                .map_err(fail)
        }
        "run" => {
            let s: Vec<Series> = columns(csv_text, "outer_iter", &["grad_norm", "rho_kN"])?
                .into_iter()
                .map(|(n, pts)| (n, pts.into_iter().filter(|p| p.1 > 0.0).collect::<Vec<_>>()))
                .filter(|s| !s.1.is_empty())
                .collect();
            let Some((x0, x1)) = extent(s.iter().flat_map(|s| s.1.iter().map(|p| p.0)), false) else { return Ok(None) };
            let Some((y0, y1)) = extent(s.iter().flat_map(|s| s.1.iter().map(|p| p.1)), true) else { return Ok(None) };
            draw(&s, "guarded CAA", ("outer iteration", "gradient norm"), x0..x1, (y0..y1).log_scale()).map(Some).map_err(fail)
        }
        _ => Ok(None),
    }
}
