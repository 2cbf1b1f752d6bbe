//! 3x5 bitmap glyphs for digits and a few symbols, used to stamp probability
//! labels onto heatmap overlays and text into synthetic test images.

const GLYPH_W: usize = 3;
const GLYPH_H: usize = 5;

fn glyph(c: char) -> Option<[u8; GLYPH_H]> {
    // Each row uses the low 3 bits, MSB is the left column.
    Some(match c {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b010, 0b010, 0b010],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        '-' => [0b000, 0b000, 0b111, 0b000, 0b000],
        ' ' => [0; GLYPH_H],
        _ => return None,
    })
}

/// Pixel extent of `text` rendered at `scale`, with one blank column between glyphs.
pub fn text_size(text: &str, scale: usize) -> (usize, usize) {
    let n = text.chars().count();
    if n == 0 {
        return (0, 0);
    }
    ((n * (GLYPH_W + 1) - 1) * scale, GLYPH_H * scale)
}

/// Calls `plot(x, y)` for every lit pixel of `text` with its top-left corner at
/// `(x0, y0)`. Unknown characters render as blanks.
pub fn render(text: &str, x0: usize, y0: usize, scale: usize, mut plot: impl FnMut(usize, usize)) {
    for (i, c) in text.chars().enumerate() {
        let Some(rows) = glyph(c) else { continue };
        let gx = x0 + i * (GLYPH_W + 1) * scale;
        for (ry, bits) in rows.iter().enumerate() {
            for cx in 0..GLYPH_W {
                if bits >> (GLYPH_W - 1 - cx) & 1 == 1 {
                    for dy in 0..scale {
                        for dx in 0..scale {
                            plot(gx + cx * scale + dx, y0 + ry * scale + dy);
                        }
                    }
                }
            }
        }
    }
}
