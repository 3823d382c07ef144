use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpisodeRow, Method};
use crate::encoders::{pca_fit, RawEmbedding, StateEmbedding};
use crate::envs::EnvKind;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsCell {
    pub method: Method,
    pub task: EnvKind,
    pub mean: f64,
    pub sem: f64,
    pub trials: usize,
    pub success_rate: f64,
}

/// Mean replans per (method, task) with standard errors, and each method's
/// task-averaged ratio to `ours`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub tasks: Vec<EnvKind>,
    pub methods: Vec<Method>,
    pub cells: Vec<ResultsCell>,
}

fn push_unique<T: PartialEq + Copy>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

pub(crate) fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl ResultsTable {
    pub fn from_rows(rows: &[EpisodeRow]) -> Self {
        let (mut tasks, mut methods) = (Vec::new(), Vec::new());
        for r in rows {
            push_unique(&mut tasks, r.task);
            push_unique(&mut methods, r.method);
        }
        let mut cells = Vec::new();
        for &method in &methods {
            for &task in &tasks {
                let sel: Vec<&EpisodeRow> = rows.iter().filter(|r| r.method == method && r.task == task).collect();
                if sel.is_empty() {
                    continue;
                }
                let xs: Vec<f64> = sel.iter().map(|r| r.replans as f64).collect();
                let (mean, sem) = mean_sem(&xs);
                let success_rate = sel.iter().filter(|r| r.succeeded).count() as f64 / sel.len() as f64;
                cells.push(ResultsCell { method, task, mean, sem, trials: sel.len(), success_rate });
            }
        }
        ResultsTable { tasks, methods, cells }
    }

    pub fn cell(&self, method: Method, task: EnvKind) -> Option<&ResultsCell> {
        self.cells.iter().find(|c| c.method == method && c.task == task)
    }

    /// Mean over tasks of `method`'s mean divided by `Ours`' mean.
    pub fn normalized(&self, method: Method) -> Option<f64> {
        self.normalized_against(method, Method::Ours)
    }

    pub fn normalized_against(&self, method: Method, reference: Method) -> Option<f64> {
        let mut ratios = Vec::new();
        for &task in &self.tasks {
            let (m, r) = (self.cell(method, task)?, self.cell(reference, task)?);
            ratios.push(m.mean / r.mean);
        }
        (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
    }

    /// Mean replans of `method` averaged over tasks.
    pub fn task_average(&self, method: Method) -> Option<f64> {
        let ms: Vec<f64> = self.cells.iter().filter(|c| c.method == method).map(|c| c.mean).collect();
        (!ms.is_empty()).then(|| ms.iter().sum::<f64>() / ms.len() as f64)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["method", "task", "mean_replans", "sem", "trials", "success_rate"])?;
        for c in &self.cells {
            w.write_record([
                c.method.name().to_string(),
                c.task.name().to_string(),
                format!("{:.4}", c.mean),
                format!("{:.4}", c.sem),
                c.trials.to_string(),
                format!("{:.4}", c.success_rate),
            ])?;
        }
        for &m in &self.methods {
            if let Some(v) = self.normalized(m) {
                w.write_record([m.name(), "all_normalized", &format!("{v:.4}"), "", "", ""])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Plain-text table for terminals.
    pub fn render(&self) -> String {
        let mut s = format!("{:<16}", "method");
        for t in &self.tasks {
            let _ = write!(s, "{:>18}", t.name());
        }
        s.push_str(&format!("{:>12}\n", "normalized"));
        for &m in &self.methods {
            let _ = write!(s, "{:<16}", m.name());
            for &t in &self.tasks {
                match self.cell(m, t) {
                    Some(c) => {
                        let _ = write!(s, "{:>18}", format!("{:.2} ± {:.2}", c.mean, c.sem));
                    }
                    None => s.push_str(&format!("{:>18}", "-")),
                }
            }
            match self.normalized(m) {
                Some(v) => s.push_str(&format!("{v:>12.2}\n")),
                None => s.push_str(&format!("{:>12}\n", "-")),
            }
        }
        s.push_str("normalized = mean over tasks of (method mean / ours mean)\n");
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanQuality {
    pub method: Method,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub plans: usize,
}

/// PSNR and SSIM of executed plans against ground truth, pooled over every
/// round of every episode of each method. One round runs per replan, so
/// the per-episode means are weighted by the replan count.
pub fn plan_quality(rows: &[EpisodeRow]) -> Vec<PlanQuality> {
    let mut methods = Vec::new();
    for r in rows {
        push_unique(&mut methods, r.method);
    }
    methods
        .into_iter()
        .map(|method| {
            let (mut p, mut s, mut n) = (0.0, 0.0, 0usize);
            for r in rows.iter().filter(|r| r.method == method) {
                p += r.mean_psnr * r.replans as f64;
                s += r.mean_ssim * r.replans as f64;
                n += r.replans;
            }
            PlanQuality { method, mean_psnr: p / n as f64, mean_ssim: s / n as f64, plans: n }
        })
        .collect()
}

pub fn read_episodes_csv(path: &Path) -> Result<Vec<EpisodeRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

/// Grouped bar chart of mean replans (with SEM whiskers) per task.
pub fn results_svg(table: &ResultsTable) -> String {
    let (bar, gap, chart_h, left, top) = (14.0, 18.0, 240.0, 50.0, 30.0);
    let group_w = bar * table.methods.len() as f64 + gap;
    let width = left + group_w * table.tasks.len() as f64 + 170.0;
    let height = top + chart_h + 60.0;
    let ymax = table.cells.iter().map(|c| c.mean + c.sem).fold(1.0, f64::max).ceil();
    let y = |v: f64| top + chart_h * (1.0 - v / ymax);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<text x="{left}" y="18">mean replans until success</text>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="black"/>"#, top + chart_h);
    for tick in 0..=ymax as usize {
        let ty = y(tick as f64);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{tick}</text>"#, left - 6.0, ty + 4.0);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{ty:.1}" x2="{:.1}" y2="{ty:.1}" stroke="#ddd"/>"##, width - 170.0);
    }
    for (ti, &task) in table.tasks.iter().enumerate() {
        let gx = left + gap / 2.0 + ti as f64 * group_w;
        for (mi, &method) in table.methods.iter().enumerate() {
            let Some(c) = table.cell(method, task) else { continue };
            let x = gx + mi as f64 * bar;
            let color = PALETTE[mi % PALETTE.len()];
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{color}"><title>{method} {task}: {:.2}</title></rect>"#,
                y(c.mean),
                bar - 2.0,
                y(0.0) - y(c.mean),
                c.mean
            );
            let cx = x + (bar - 2.0) / 2.0;
            let _ = writeln!(
                s,
                r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                y(c.mean + c.sem),
                y((c.mean - c.sem).max(0.0))
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{task}</text>"#,
            gx + group_w / 2.0 - gap / 2.0,
            top + chart_h + 16.0
        );
    }
    for (mi, &method) in table.methods.iter().enumerate() {
        let lx = width - 160.0;
        let ly = top + 14.0 * mi as f64;
        let _ = writeln!(s, r#"<rect x="{lx:.1}" y="{ly:.1}" width="10" height="10" fill="{}"/>"#, PALETTE[mi % PALETTE.len()]);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{method}</text>"#, lx + 14.0, ly + 9.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Two-component PCA coordinates of every canonical embedding, per task.
pub fn embedding_csv(canonical: &[(EnvKind, Vec<String>, Vec<StateEmbedding>)]) -> Result<String> {
    let mut out = String::from("task,object,pc1,pc2\n");
    for (task, objects, embs) in canonical {
        let raws: Vec<RawEmbedding> = embs.iter().map(|e| RawEmbedding(e.values().to_vec())).collect();
        let dim = raws.first().map_or(0, RawEmbedding::dim);
        let k = 2.min(raws.len().saturating_sub(1)).min(dim);
        let coords: Vec<Vec<f64>> = if k == 0 {
            vec![vec![0.0, 0.0]; raws.len()]
        } else {
            let p = pca_fit(&raws, k)?;
            raws.iter()
                .map(|r| {
                    let mut c = p.apply(r).map(|e| e.0)?;
                    c.resize(2, 0.0);
                    Ok(c)
                })
                .collect::<Result<_>>()?
        };
        for (obj, c) in objects.iter().zip(coords) {
            let _ = writeln!(out, "{task},{obj},{:.6},{:.6}", c[0], c[1]);
        }
    }
    Ok(out)
}
