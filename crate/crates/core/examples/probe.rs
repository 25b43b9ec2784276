// Scratch probe for parameter calibration runs (not part of the library).
use neurodg::cell::{integrate_cell, CellRun};
use neurodg::diag::Diagnostics;
use neurodg::ionic::{couple, VolumeFractions};
use neurodg::metabolic::phosphorylation_ratios;
use neurodg::metabolic::BloodSchedule;
use neurodg::params::Params;

fn main() {
    let mut args = std::env::args().skip(1);
    let delta: f64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let eps: f64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(9.33);
    let tf: f64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(20.0);
    let kbath: f64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(4.0);
    let xi: f64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(0.0);

    let mut params = Params::default_set();
    params.ionic.epsilon_k = eps;
    params.ionic.k_bath = kbath;
    params.ionic.k_inf = kbath;
    let mut run = CellRun::baseline(params);
    if xi > 0.0 {
        run.xi = neurodg::cell::XiFunction::Constant { value: xi };
    }
    run.t_final_s = tf;
    run.sample_every_s = 0.25;
    if delta > 0.0 {
        run.schedule = BloodSchedule {
            delta,
            t1: 10.0,
            r1: 5.0,
            t2: 70.0,
            r2: 60.0,
            t_final: tf,
        };
    }
    match integrate_cell(&run) {
        Ok(traj) => {
            println!("# delta={delta} eps={eps} kbath={kbath} T={tf} xi={xi}");
            println!("t u K_o Na_i ATP_n ADP_n O2_b O2_ecs O2_n p_factor");
            for (i, t) in traj.t.iter().enumerate() {
                let s = &traj.ionic[i];
                let m = &traj.metabolic[i];
                let p_n = m.neuron.atp / m.neuron.adp.max(1e-30);
                println!(
                    "{t:8.2} {:8.2} {:7.3} {:7.3} {:6.3} {:8.5} {:6.3} {:7.4} {:7.4} {:6.4}",
                    s.u, s.k_o, s.na_i, m.neuron.atp, m.neuron.adp, m.o2_b, m.o2_ecs, m.neuron.o2,
                    p_n / (0.1 + p_n)
                );
            }
            let w = run.schedule.t1 + run.schedule.r1;
            println!(
                "# spikes={} peak_f={:.1} dom_f={:.1} (window>{w}s) maxKo={:.2} maxNa={:.2} minATPn={:.3}",
                traj.spikes.len(),
                traj.spikes.peak_frequency(w),
                traj.spikes.dominant_frequency(w),
                traj.stats.max_k_o,
                traj.stats.max_na_i,
                traj.stats.min_atp_n
            );
            println!("# diag [gate,revflux,ratio,vol,o2] = {:?}", traj.diagnostics);
            // spikes per 2-second bin
            let nbins = (tf / 2.0).ceil() as usize;
            let mut bins = vec![0usize; nbins.max(1)];
            for st in &traj.spikes.times {
                let b = ((st / 2.0) as usize).min(bins.len() - 1);
                bins[b] += 1;
            }
            println!("# spikes/2s: {:?}", bins);
            // time-averaged pump/glia currents over the sampled trajectory
            let diag = Diagnostics::new();
            let vol = VolumeFractions {
                eta_n: run.params.metabolic.eta_n,
                eta_a: run.params.metabolic.eta_a,
                eta_ecs: run.params.metabolic.eta_ecs,
            };
            let (mut sp, mut sg, mut spsi_n, mut spsi_a) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..traj.t.len() {
                let r = phosphorylation_ratios(&traj.metabolic[i], &diag);
                let (c, pumps) =
                    couple(&traj.ionic[i], &run.params.ionic, &vol, 0.0, r.p_n, r.p_a).unwrap();
                sp += pumps.i_pump;
                sg += pumps.i_glia;
                spsi_n += c.psi_n;
                spsi_a += c.psi_a;
            }
            let n = traj.t.len() as f64;
            println!(
                "# avg I_pump={:.6} I_glia={:.6} psi_n={:.6} psi_a={:.6}",
                sp / n, sg / n, spsi_n / n, spsi_a / n
            );
        }
        Err(e) => println!("RUN FAILED: {e}"),
    }
}
