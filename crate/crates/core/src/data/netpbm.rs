//! Binary netpbm codecs: P5 (PGM, 8 or 16 bit) and P6 (PPM, 8 bit).

use super::image::{DecodedImage, Gray16Image, GrayImage, RgbImage};

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, String> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err("not a netpbm file".into());
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(&b) if is_space(b) => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n' && b != b'\r') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err("malformed header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("header value out of range")?;
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).copied().is_some_and(is_space) {
        return Err("missing whitespace after maxval".into());
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(format!("invalid maxval {maxval}"));
    }
    Ok(Header {
        magic,
        width,
        height,
        maxval,
        data_offset: pos + 1,
    })
}

pub fn decode(bytes: &[u8]) -> Result<DecodedImage, String> {
    let h = parse_header(bytes)?;
    let raster = &bytes[h.data_offset..];
    let channels = match &h.magic {
        b"P5" => 1,
        b"P6" => 3,
        m => return Err(format!("unsupported netpbm variant {}", String::from_utf8_lossy(m))),
    };
    let samples = h.width * h.height * channels;
    let wide = h.maxval > 255;
    let need = samples * if wide { 2 } else { 1 };
    if raster.len() < need {
        return Err(format!("truncated raster: need {need} bytes, have {}", raster.len()));
    }
    let scale8 = |v: usize| -> u8 {
        if h.maxval == 255 {
            v as u8
        } else {
            ((v * 255 + h.maxval / 2) / h.maxval) as u8
        }
    };
    match (channels, wide) {
        (1, false) => Ok(DecodedImage::Gray(GrayImage {
            width: h.width,
            height: h.height,
            data: raster[..samples].iter().map(|&v| scale8(v as usize)).collect(),
        })),
        (1, true) => Ok(DecodedImage::Gray16(Gray16Image {
            width: h.width,
            height: h.height,
            data: raster[..need]
                .chunks_exact(2)
                .map(|b| {
                    let v = u16::from_be_bytes([b[0], b[1]]) as usize;
                    if h.maxval == 65535 {
                        v as u16
                    } else {
                        ((v * 65535 + h.maxval / 2) / h.maxval) as u16
                    }
                })
                .collect(),
        })),
        (3, false) => Ok(DecodedImage::Rgb(RgbImage {
            width: h.width,
            height: h.height,
            data: raster[..samples].iter().map(|&v| scale8(v as usize)).collect(),
        })),
        _ => Err("16-bit PPM is not supported".into()),
    }
}

fn header(magic: &str, w: usize, h: usize, maxval: usize) -> Vec<u8> {
    format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes()
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = header("P5", img.width, img.height, 255);
    out.extend_from_slice(&img.data);
    out
}

pub fn encode_pgm16(img: &Gray16Image) -> Vec<u8> {
    let mut out = header("P5", img.width, img.height, 65535);
    out.extend(img.data.iter().flat_map(|v| v.to_be_bytes()));
    out
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = header("P6", img.width, img.height, 255);
    out.extend_from_slice(&img.data);
    out
}
