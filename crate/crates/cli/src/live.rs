//! Socket plumbing for `detect` and `replay`.

use anyhow::{Context, Result};
use quake_core::detector::{
    encode_packet, receive_loop, AlarmLog, Detector, DetectorConfig, ReceiveConfig, ReceiveStats, ReplaySource,
};
use quake_core::harness;
use quake_core::nn::Classifier;
use std::fs::File;
use std::io::BufWriter;
use std::net::UdpSocket;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

pub enum Source {
    Wav { path: PathBuf, speed: f64, packet_samples: usize },
    Udp { addr: String, idle_timeout: Option<f64> },
}

fn stop_flag() -> Arc<AtomicBool> {
    let stop = Arc::new(AtomicBool::new(false));
    let s = stop.clone();
    if let Err(e) = ctrlc::set_handler(move || s.store(true, Ordering::SeqCst)) {
        log::warn!("no Ctrl-C handler: {e}");
    }
    stop
}

pub fn detect(
    classifier: &Classifier,
    source: Source,
    config: &DetectorConfig,
    receive: &ReceiveConfig,
    log_path: &Path,
) -> Result<ReceiveStats> {
    if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let mut log = AlarmLog::new(BufWriter::new(file), classifier.sample_rate());
    let rate = classifier.sample_rate() as f64;
    let mut on_alarm = |e: &quake_core::detector::AlarmEvent| {
        println!(
            "ALARM t={:.3}s p={:.3} gather={:.1}ms process={:.2}ms predict={:.2}ms total={:.1}ms",
            (e.trigger_sample_index + 1) as f64 / rate,
            e.probability,
            e.gather_ms,
            e.process_ms,
            e.predict_ms,
            e.total_ms
        );
        log.record(e)
    };
    let mut detector = Detector::new(classifier, config.clone())?;
    let stop = stop_flag();

    let stats = match source {
        Source::Wav { path, speed, packet_samples } => {
            let w = harness::load_clip(&path, classifier.sample_rate())?;
            let packets = ReplaySource::with_packet_size(&w, speed, packet_samples)?
                .map(|p| encode_packet(&p).expect("packet sizes are bounded"))
                .take_while(|_| !stop.load(Ordering::SeqCst));
            receive_loop(packets, &mut detector, receive, &mut on_alarm)?
        }
        Source::Udp { addr, idle_timeout } => {
            let socket = UdpSocket::bind(&addr).with_context(|| format!("binding {addr}"))?;
            socket.set_read_timeout(Some(Duration::from_millis(100)))?;
            log::info!("listening on {}", socket.local_addr()?);
            let (tx, rx) = mpsc::channel::<Vec<u8>>();
            let reader_stop = stop.clone();
            let reader = std::thread::spawn(move || {
                let mut buf = vec![0u8; 65_536];
                while !reader_stop.load(Ordering::SeqCst) {
                    match socket.recv_from(&mut buf) {
                        Ok((n, _)) => {
                            if tx.send(buf[..n].to_vec()).is_err() {
                                break;
                            }
                        }
                        Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {
                        }
                        Err(e) => {
                            log::error!("socket error: {e}");
                            break;
                        }
                    }
                }
            });
            let idle = idle_timeout.map(Duration::from_secs_f64);
            let mut last = Instant::now();
            let datagrams = std::iter::from_fn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    return None;
                }
                match rx.recv_timeout(Duration::from_millis(100)) {
                    Ok(d) => {
                        last = Instant::now();
                        return Some(d);
                    }
                    Err(mpsc::RecvTimeoutError::Timeout) => {
                        if idle.is_some_and(|t| last.elapsed() >= t) {
                            log::info!("idle for {:.1}s, stopping", last.elapsed().as_secs_f64());
                            return None;
                        }
                    }
                    Err(mpsc::RecvTimeoutError::Disconnected) => return None,
                }
            });
            let result = receive_loop(datagrams, &mut detector, receive, &mut on_alarm);
            stop.store(true, Ordering::SeqCst);
            let _ = reader.join();
            result?
        }
    };
    println!(
        "datagrams {} accepted {} duplicates {} out_of_order {} gaps {} missing {} crc_failures {} malformed {} samples {} alarms {}",
        stats.datagrams,
        stats.accepted,
        stats.duplicates,
        stats.out_of_order,
        stats.gaps,
        stats.missing_packets,
        stats.crc_failures,
        stats.malformed,
        stats.samples,
        stats.alarms
    );
    println!("alarm log: {}", log_path.display());
    Ok(stats)
}

pub fn replay(wav: &Path, dest: &str, speed: f64, packet_samples: usize) -> Result<()> {
    let w = harness::read_clip(wav)?;
    let socket = UdpSocket::bind("0.0.0.0:0")?;
    socket.connect(dest).with_context(|| format!("connecting to {dest}"))?;
    let stop = stop_flag();
    let started = Instant::now();
    let mut sent = 0usize;
    for p in ReplaySource::with_packet_size(&w, speed, packet_samples)? {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        socket.send(&encode_packet(&p)?)?;
        sent += 1;
    }
    println!(
        "sent {sent} packets ({} samples at {} Hz) in {:.2}s",
        w.len(),
        w.sample_rate(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
