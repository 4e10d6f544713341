//! `mer extract`: WAV directory -> one log mel-band feature CSV per song.

use mer_core::audio::{default_filterbank, log_mel_segments, read_wav};
use mer_core::dataset::write_feature_csv;
use mer_core::error::{Error, Result};

use crate::config::{prepare_output, require_dir, ResolvedConfig};
use crate::ExtractArgs;

pub fn run(args: ExtractArgs) -> Result<()> {
    require_dir(&args.audio_dir, "audio")?;
    if args.n_mels == 0 {
        return Err(Error::Config("n_mels must be >= 1".into()));
    }
    std::fs::create_dir_all(&args.out_dir)?;

    let mut resolved = ResolvedConfig::default();
    resolved.put("audio_dir", args.audio_dir.display());
    resolved.put("out_dir", args.out_dir.display());
    resolved.put("n_mels", args.n_mels);
    let provenance = resolved.provenance();

    let mut wavs: Vec<std::path::PathBuf> = std::fs::read_dir(&args.audio_dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("wav"))
                .unwrap_or(false)
        })
        .collect();
    wavs.sort();
    if wavs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no .wav files in {}",
            args.audio_dir.display()
        )));
    }

    let mut written = 0usize;
    for path in &wavs {
        let song_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_default();
        let result = read_wav(path).and_then(|clip| {
            let fb = default_filterbank(args.n_mels, clip.sample_rate)?;
            log_mel_segments(&clip, &fb, &song_id)
        });
        match result {
            Ok(seq) => {
                let out = args.out_dir.join(format!("{song_id}.csv"));
                prepare_output(&out)?;
                std::fs::write(&out, write_feature_csv(&[&seq], Some(&provenance)))?;
                println!("{} -> {} ({} segments)", path.display(), out.display(), seq.len());
                written += 1;
            }
            Err(e) => eprintln!("warning: skipping {}: {e}", path.display()),
        }
    }
    if written == 0 {
        return Err(Error::InvalidInput("no file could be processed".into()));
    }
    Ok(())
}
