//! Unions two in-memory layer tars, showing a replaced file, a plain
//! whiteout and an opaque directory.

use anyhow::Result;
use bloatlens::fs::load_layers;
use bloatlens::Diagnostics;

enum Member<'a> {
    File(&'a str, &'a [u8]),
    Dir(&'a str),
}

fn layer(members: &[Member]) -> Result<Vec<u8>> {
    let mut b = tar::Builder::new(Vec::new());
    for m in members {
        let mut h = tar::Header::new_gnu();
        match m {
            Member::File(p, data) => {
                h.set_size(data.len() as u64);
                h.set_mode(0o644);
                b.append_data(&mut h, p, *data)?;
            }
            Member::Dir(p) => {
                h.set_entry_type(tar::EntryType::Directory);
                h.set_size(0);
                h.set_mode(0o755);
                b.append_data(&mut h, p, std::io::empty())?;
            }
        }
    }
    Ok(b.into_inner()?)
}

fn main() -> Result<()> {
    use Member::*;
    let base = layer(&[
        Dir("etc"),
        File("etc/motd", b"hello\n"),
        File("etc/hosts", b"127.0.0.1 localhost\n"),
        Dir("var/cache"),
        File("var/cache/apt.bin", &[0; 4096]),
    ])?;
    let top = layer(&[
        File("etc/.wh.hosts", b""),
        File("etc/motd", b"patched\n"),
        File("var/cache/.wh..wh..opq", b""),
        File("var/cache/fresh", b"x"),
    ])?;

    let mut diag = Diagnostics::new();
    let fs = load_layers([base.as_slice(), top.as_slice()], &mut diag)?;
    for e in fs.iter() {
        println!("{:<9} {:>5}  {}", e.kind.as_str(), e.size, e.path);
    }
    println!("total {} bytes in {} entries", fs.total_size(), fs.len());
    Ok(())
}
