#include "evimpact/event_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <string>

namespace evimpact {
namespace {

std::int64_t parse_field(std::string_view field, int line_no,
                         const char *name) {
  std::int64_t value = 0;
  const char *first = field.data();
  const char *last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || field.empty())
    throw ParseError("line " + std::to_string(line_no) + ": field '" + name +
                     "' is not an unsigned integer: '" + std::string(field) +
                     "'");
  if (value < 0)
    throw ParseError("line " + std::to_string(line_no) + ": field '" + name +
                     "' is negative");
  return value;
}

void write_u32(std::ostream &os, std::uint32_t v) {
  std::array<unsigned char, 4> b{static_cast<unsigned char>(v & 0xff),
                                 static_cast<unsigned char>((v >> 8) & 0xff),
                                 static_cast<unsigned char>((v >> 16) & 0xff),
                                 static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char *>(b.data()), 4);
}

std::uint32_t read_u32(std::istream &is, const char *what) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char *>(b.data()), 4))
    throw FormatError(std::string("truncated header field: ") + what);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

void write_f32_payload(std::ostream &os, const std::vector<float> &values) {
  static_assert(sizeof(float) == 4);
  // Host is little-endian; raw write matches the on-disk layout.
  os.write(reinterpret_cast<const char *>(values.data()),
           std::streamsize(values.size() * sizeof(float)));
}

std::vector<float> read_f32_payload(std::istream &is, std::size_t count,
                                    const char *format) {
  std::vector<float> values(count);
  if (!is.read(reinterpret_cast<char *>(values.data()),
               std::streamsize(count * sizeof(float))))
    throw FormatError(std::string(format) + ": truncated payload");
  char extra;
  if (is.read(&extra, 1))
    throw FormatError(std::string(format) + ": trailing bytes after payload");
  for (float v : values)
    if (!(v >= 0.0f && v <= 1.0f))
      throw FormatError(std::string(format) + ": value outside [0, 1]");
  return values;
}

void check_magic(std::istream &is, const char *magic, const char *format) {
  std::array<char, 4> got{};
  if (!is.read(got.data(), 4))
    throw FormatError(std::string(format) + ": file too short for magic");
  if (std::memcmp(got.data(), magic, 4) != 0)
    throw FormatError(std::string(format) + ": bad magic");
}

}  // namespace

EventStream read_events_csv(const std::filesystem::path &path, int width,
                            int height) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  if (width <= 0 || height <= 0)
    throw DomainError("read_events_csv: non-positive geometry");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t_us,x,y,p")
    throw ParseError(path.string() + ": expected header 't_us,x,y,p', got '" +
                     line + "'");

  EventStream stream;
  stream.width = width;
  stream.height = height;
  int line_no = 1;
  bool sorted = true;
  std::int64_t prev_t = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string_view, 4> fields;
    std::string_view rest = line;
    for (int f = 0; f < 4; ++f) {
      const auto comma = rest.find(',');
      if (f < 3) {
        if (comma == std::string_view::npos)
          throw ParseError("line " + std::to_string(line_no) +
                           ": expected 4 comma-separated fields");
        fields[f] = rest.substr(0, comma);
        rest = rest.substr(comma + 1);
      } else {
        if (comma != std::string_view::npos)
          throw ParseError("line " + std::to_string(line_no) +
                           ": expected 4 comma-separated fields");
        fields[f] = rest;
      }
    }
    Event e;
    e.t_us = parse_field(fields[0], line_no, "t_us");
    e.x = int(parse_field(fields[1], line_no, "x"));
    e.y = int(parse_field(fields[2], line_no, "y"));
    const std::int64_t p_raw = parse_field(fields[3], line_no, "p");
    if (p_raw != 0 && p_raw != 1)
      throw ParseError("line " + std::to_string(line_no) +
                       ": polarity must be 0 or 1");
    e.p = p_raw == 1 ? +1 : -1;
    if (e.x >= width || e.y >= height)
      throw DomainError("line " + std::to_string(line_no) +
                        ": coordinate outside " + std::to_string(width) + "x" +
                        std::to_string(height) + " geometry");
    if (e.t_us < prev_t) sorted = false;
    prev_t = e.t_us;
    stream.events.push_back(e);
  }
  if (!sorted)
    std::stable_sort(stream.events.begin(), stream.events.end(),
                     [](const Event &a, const Event &b) { return a.t_us < b.t_us; });
  stream.duration_us =
      stream.events.empty() ? 0 : stream.events.back().t_us;
  return stream;
}

void write_events_csv(const EventStream &stream,
                      const std::filesystem::path &path) {
  stream.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "t_us,x,y,p\n";
  for (const Event &e : stream.events)
    out << e.t_us << ',' << e.x << ',' << e.y << ',' << (e.p > 0 ? 1 : 0)
        << '\n';
  if (!out) throw FormatError("write failed: " + path.string());
}

void write_evf(const FrameStack &stack, const std::filesystem::path &path) {
  stack.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write("EVF1", 4);
  write_u32(out, std::uint32_t(stack.k_count));
  write_u32(out, std::uint32_t(stack.height));
  write_u32(out, std::uint32_t(stack.width));
  write_u32(out, std::uint32_t(stack.dt_us));
  write_f32_payload(out, stack.values);
  if (!out) throw FormatError("write failed: " + path.string());
}

FrameStack read_evf(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  check_magic(in, "EVF1", "EVF1");
  FrameStack stack;
  stack.k_count = int(read_u32(in, "K"));
  stack.height = int(read_u32(in, "H"));
  stack.width = int(read_u32(in, "W"));
  stack.dt_us = read_u32(in, "dt_us");
  if (stack.height <= 0 || stack.width <= 0 || stack.dt_us < 1)
    throw FormatError("EVF1: bad header dimensions");
  stack.values = read_f32_payload(
      in, std::size_t(stack.k_count) * stack.height * stack.width, "EVF1");
  return stack;
}

void write_prm(const PlaneStack &stack, const std::filesystem::path &path) {
  stack.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write("PRM1", 4);
  write_u32(out, std::uint32_t(stack.k_count));
  write_u32(out, std::uint32_t(stack.channels));
  write_u32(out, std::uint32_t(stack.height));
  write_u32(out, std::uint32_t(stack.width));
  write_f32_payload(out, stack.values);
  if (!out) throw FormatError("write failed: " + path.string());
}

PlaneStack read_prm(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  check_magic(in, "PRM1", "PRM1");
  PlaneStack stack;
  stack.k_count = int(read_u32(in, "K"));
  stack.channels = int(read_u32(in, "C"));
  stack.height = int(read_u32(in, "H"));
  stack.width = int(read_u32(in, "W"));
  if (stack.channels <= 0 || stack.height <= 0 || stack.width <= 0)
    throw FormatError("PRM1: bad header dimensions");
  stack.values = read_f32_payload(
      in,
      std::size_t(stack.k_count) * stack.channels * stack.height * stack.width,
      "PRM1");
  return stack;
}

PlaneStack labels_to_onehot(const LabelStack &labels) {
  PlaneStack out = PlaneStack::zeros(labels.k_count, kNumClasses,
                                     labels.height, labels.width);
  const std::size_t n = labels.frame_size();
  for (int k = 0; k < labels.k_count; ++k) {
    auto src = labels.frame(k);
    for (std::size_t i = 0; i < n; ++i) {
      if (src[i] >= kNumClasses)
        throw DomainError("labels_to_onehot: label out of range");
      out.channel(k, src[i])[i] = 1.0f;
    }
  }
  return out;
}

LabelStack onehot_to_labels(const PlaneStack &stack) {
  stack.validate_probabilities();
  LabelStack out = LabelStack::zeros(stack.k_count, stack.height, stack.width);
  const std::size_t n = stack.plane_size();
  for (int k = 0; k < stack.k_count; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      float best_v = stack.channel(k, 0)[i];
      for (int c = 1; c < stack.channels; ++c) {
        const float v = stack.channel(k, c)[i];
        if (v > best_v) {
          best = c;
          best_v = v;
        }
      }
      out.frame(k)[i] = std::uint8_t(best);
    }
  }
  return out;
}

}  // namespace evimpact
