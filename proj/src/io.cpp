#include "oep/io.hpp"

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace oep::io {

using nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    fail(ErrorCategory::Data, where + ": '" + std::string(s) + "' is not a number");
  if (!std::isfinite(v)) fail(ErrorCategory::Data, where + ": non-finite value '" + std::string(s) + "'");
  return v;
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCategory::Io, "cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) fail(ErrorCategory::Io, "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCategory::Io, "cannot move '" + tmp.string() + "' to '" + path.string() + "'");
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::Io, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t b = 0;
  for (std::size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(b, i - b));
      b = i + 1;
    }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Non-empty lines with their 1-based line numbers.
std::vector<std::pair<int, std::string_view>> lines_of(const std::string& text) {
  std::vector<std::pair<int, std::string_view>> out;
  int no = 0;
  std::size_t b = 0;
  const std::string_view all(text);
  while (b <= all.size()) {
    auto e = all.find('\n', b);
    if (e == std::string_view::npos) e = all.size();
    ++no;
    const auto line = trim(all.substr(b, e - b));
    if (!line.empty()) out.emplace_back(no, line);
    b = e + 1;
  }
  return out;
}

std::string at(const std::string& source, int line) { return source + ":" + std::to_string(line); }

}  // namespace

ImuRecording parse_signal_csv(const std::string& text, double declared_rate_hz, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines.front().second != "t,ax,ay,az,gx,gy,gz")
    fail(ErrorCategory::Data, source + ": expected header 't,ax,ay,az,gx,gy,gz'");
  ImuRecording rec;
  rec.sample_rate_hz = declared_rate_hz;
  std::vector<double> t;
  std::array<std::vector<double>*, 6> ch{&rec.accel_x, &rec.accel_y, &rec.accel_z,
                                         &rec.gyro_x,  &rec.gyro_y,  &rec.gyro_z};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto [no, line] = lines[i];
    const auto f = split(line, ',');
    if (f.size() != 7) fail(ErrorCategory::Data, at(source, no) + ": expected 7 fields, got " + std::to_string(f.size()));
    const double ti = parse_double(f[0], at(source, no));
    if (!t.empty() && !(ti > t.back())) fail(ErrorCategory::Data, at(source, no) + ": timestamps must increase");
    t.push_back(ti);
    for (std::size_t k = 0; k < 6; ++k) ch[k]->push_back(parse_double(f[k + 1], at(source, no)));
  }
  if (t.empty()) fail(ErrorCategory::Data, source + ": no samples");
  if (t.size() >= 2) {
    std::vector<double> dt(t.size() - 1);
    for (std::size_t i = 1; i < t.size(); ++i) dt[i - 1] = t[i] - t[i - 1];
    std::nth_element(dt.begin(), dt.begin() + static_cast<std::ptrdiff_t>(dt.size() / 2), dt.end());
    const double median = dt[dt.size() / 2];
    if (std::abs(median * declared_rate_hz - 1.0) > 1e-6)
      fail(ErrorCategory::Data, source + ": median sample interval " + format_double(median) +
                                    " s does not match the declared rate " + format_double(declared_rate_hz) + " Hz");
  }
  rec.validate();
  return rec;
}

std::string format_signal_csv(const ImuRecording& rec) {
  std::string out = "t,ax,ay,az,gx,gy,gz\n";
  const auto ch = rec.channels();
  for (std::size_t s = 0; s < rec.size(); ++s) {
    out += format_double(static_cast<double>(s) / rec.sample_rate_hz);
    for (const auto* c : ch) {
      out += ',';
      out += format_double((*c)[s]);
    }
    out += '\n';
  }
  return out;
}

std::vector<LabelInterval> parse_annotations_csv(const std::string& text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines.front().second != "start_s,end_s,label")
    fail(ErrorCategory::Data, source + ": expected header 'start_s,end_s,label'");
  std::vector<LabelInterval> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto [no, line] = lines[i];
    const auto f = split(line, ',');
    if (f.size() != 3) fail(ErrorCategory::Data, at(source, no) + ": expected 3 fields, got " + std::to_string(f.size()));
    LabelInterval iv;
    iv.start_s = parse_double(f[0], at(source, no));
    iv.end_s = parse_double(f[1], at(source, no));
    if (!(iv.end_s > iv.start_s)) fail(ErrorCategory::Data, at(source, no) + ": end_s must be greater than start_s");
    const auto name = trim(f[2]);
    const auto label = parse_activity_label(name);
    if (!label) {
      std::string accepted;
      for (const auto& n : accepted_label_names()) accepted += (accepted.empty() ? "" : ", ") + n;
      fail(ErrorCategory::Data,
           at(source, no) + ": unknown label '" + std::string(name) + "'; accepted labels: " + accepted);
    }
    iv.label = *label;
    out.push_back(iv);
  }
  return out;
}

std::string format_annotations_csv(const std::vector<LabelInterval>& intervals) {
  std::string out = "start_s,end_s,label\n";
  for (const auto& iv : intervals)
    out += format_double(iv.start_s) + "," + format_double(iv.end_s) + "," + std::string(name(iv.label)) + "\n";
  return out;
}

namespace {

const char* gender_name(Gender g) { return g == Gender::Male ? "male" : "female"; }
const char* sarcopenia_name(SarcopeniaStatus s) {
  switch (s) {
    case SarcopeniaStatus::None: return "none";
    case SarcopeniaStatus::PreSarcopenia: return "pre_sarcopenia";
    case SarcopeniaStatus::Sarcopenia: return "sarcopenia";
  }
  return "none";
}
const char* dataset_name(DatasetId d) { return d == DatasetId::Home ? "home" : "lab"; }

}  // namespace

SubjectFile parse_subject(const std::string& text, const std::string& source) {
  SubjectFile out;
  bool have_id = false;
  for (const auto& [no, line] : lines_of(text)) {
    if (line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorCategory::Data, at(source, no) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto where = at(source, no);
    auto& m = out.meta;
    if (key == "id") {
      m.subject_id = std::string(value);
      have_id = !value.empty();
    } else if (key == "age") {
      m.age = parse_double(value, where);
    } else if (key == "weight") {
      m.weight = parse_double(value, where);
    } else if (key == "height") {
      m.height = parse_double(value, where);
    } else if (key == "sample_rate_hz") {
      out.sample_rate_hz = parse_double(value, where);
    } else if (key == "gender") {
      if (value == "female") m.gender = Gender::Female;
      else if (value == "male") m.gender = Gender::Male;
      else fail(ErrorCategory::Data, where + ": gender must be female or male");
    } else if (key == "sarcopenia_status") {
      if (value == "none") m.sarcopenia_status = SarcopeniaStatus::None;
      else if (value == "pre_sarcopenia") m.sarcopenia_status = SarcopeniaStatus::PreSarcopenia;
      else if (value == "sarcopenia") m.sarcopenia_status = SarcopeniaStatus::Sarcopenia;
      else fail(ErrorCategory::Data, where + ": sarcopenia_status must be none, pre_sarcopenia or sarcopenia");
    } else if (key == "dataset_id") {
      if (value == "lab") m.dataset_id = DatasetId::Lab;
      else if (value == "home") m.dataset_id = DatasetId::Home;
      else fail(ErrorCategory::Data, where + ": dataset_id must be lab or home");
    } else {
      fail(ErrorCategory::Data, where + ": unknown key '" + std::string(key) + "'");
    }
  }
  if (!have_id) fail(ErrorCategory::Data, source + ": missing id");
  if (!(out.sample_rate_hz > 0)) fail(ErrorCategory::Data, source + ": sample_rate_hz must be positive");
  out.meta.validate();
  return out;
}

std::string format_subject(const SubjectMeta& m, double sample_rate_hz) {
  std::string out;
  out += "id=" + m.subject_id + "\n";
  out += "age=" + format_double(m.age) + "\n";
  out += std::string("gender=") + gender_name(m.gender) + "\n";
  out += "weight=" + format_double(m.weight) + "\n";
  out += "height=" + format_double(m.height) + "\n";
  out += std::string("sarcopenia_status=") + sarcopenia_name(m.sarcopenia_status) + "\n";
  out += std::string("dataset_id=") + dataset_name(m.dataset_id) + "\n";
  out += "sample_rate_hz=" + format_double(sample_rate_hz) + "\n";
  return out;
}

SessionPaths SessionPaths::in(const fs::path& dir) {
  return {dir / "signal.csv", dir / "annotations.csv", dir / "subject.txt"};
}

AnnotatedSession load_session(const SessionPaths& p) {
  const auto subject = parse_subject(read_file(p.subject), p.subject.string());
  AnnotatedSession s;
  s.subject = subject.meta;
  s.recording = parse_signal_csv(read_file(p.signal), subject.sample_rate_hz, p.signal.string());
  if (fs::exists(p.annotations))
    s.intervals = parse_annotations_csv(read_file(p.annotations), p.annotations.string());
  s.validate();
  return s;
}

void save_session(const AnnotatedSession& session, const fs::path& dir) {
  const auto p = SessionPaths::in(dir);
  write_atomic(p.signal, format_signal_csv(session.recording));
  write_atomic(p.annotations, format_annotations_csv(session.intervals));
  write_atomic(p.subject, format_subject(session.subject, session.recording.sample_rate_hz));
}

std::vector<fs::path> session_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) fail(ErrorCategory::Io, "'" + root.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "signal.csv")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- bundle

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_u64(std::uint64_t v) {
  char buf[17];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, 16);
  return std::string(buf, r.ptr);
}

class Writer {
 public:
  Writer& word(std::string_view w) {
    out_ += w;
    out_ += ' ';
    return *this;
  }
  Writer& num(long long v) { return word(std::to_string(v)); }
  Writer& real(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
    return word(std::string_view(buf, static_cast<std::size_t>(r.ptr - buf)));
  }
  Writer& reals(std::span<const double> v) {
    num(static_cast<long long>(v.size()));
    for (double x : v) real(x);
    return *this;
  }
  Writer& ints(std::span<const int> v) {
    num(static_cast<long long>(v.size()));
    for (int x : v) num(x);
    return *this;
  }
  // Length-prefixed raw text, safe for spaces and newlines.
  Writer& text(std::string_view s) {
    num(static_cast<long long>(s.size()));
    out_ += s;
    out_ += ' ';
    return *this;
  }
  Writer& matrix(const models::Matrix& m) {
    num(static_cast<long long>(m.rows())).num(static_cast<long long>(m.cols()));
    for (double x : m.data()) real(x);
    return *this;
  }
  Writer& newline() {
    if (!out_.empty() && out_.back() == ' ') out_.back() = '\n';
    else out_ += '\n';
    return *this;
  }
  std::string str() && { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view s) : s_(s) {}

  std::string_view word() {
    skip();
    const auto b = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (b == pos_) corrupt("unexpected end of data");
    return s_.substr(b, pos_ - b);
  }
  void expect(std::string_view w) {
    if (word() != w) corrupt("expected '" + std::string(w) + "'");
  }
  long long num() {
    const auto w = word();
    long long v = 0;
    const auto r = std::from_chars(w.data(), w.data() + w.size(), v);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size()) corrupt("bad integer '" + std::string(w) + "'");
    return v;
  }
  std::size_t count(std::size_t limit = std::size_t{1} << 32) {
    const long long v = num();
    if (v < 0 || static_cast<unsigned long long>(v) > limit) corrupt("implausible count");
    return static_cast<std::size_t>(v);
  }
  double real() {
    auto w = word();
    bool neg = false;
    if (!w.empty() && w.front() == '-') {
      neg = true;
      w.remove_prefix(1);
    }
    double v = 0;
    const auto r = std::from_chars(w.data(), w.data() + w.size(), v, std::chars_format::hex);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size()) {
      // inf/nan are written in decimal form by to_chars
      if (w == "inf") v = std::numeric_limits<double>::infinity();
      else if (w == "nan") v = std::numeric_limits<double>::quiet_NaN();
      else corrupt("bad float '" + std::string(w) + "'");
    }
    return neg ? -v : v;
  }
  std::vector<double> reals() {
    std::vector<double> v(count());
    for (auto& x : v) x = real();
    return v;
  }
  std::vector<int> ints() {
    std::vector<int> v(count());
    for (auto& x : v) x = static_cast<int>(num());
    return v;
  }
  std::string text() {
    const std::size_t n = count();
    skip_one_space();
    if (pos_ + n > s_.size()) corrupt("truncated text");
    std::string out(s_.substr(pos_, n));
    pos_ += n;
    return out;
  }
  models::Matrix matrix() {
    const std::size_t rows = count(), cols = count(1 << 20);
    if (cols == 0 && rows != 0) corrupt("matrix without columns");
    if (rows * cols > (s_.size() - pos_) / 2 + 1) corrupt("matrix larger than the file");
    std::vector<double> data(rows * cols);
    for (auto& x : data) x = real();
    return cols == 0 ? models::Matrix(0, 0) : models::Matrix(cols, std::move(data));
  }
  bool at_end() {
    skip();
    return pos_ == s_.size();
  }
  [[noreturn]] static void corrupt(const std::string& why) {
    fail(ErrorCategory::Integrity, "model bundle is corrupted: " + why);
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  void skip_one_space() {
    if (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
  }
  std::string_view s_;
  std::size_t pos_ = 0;
};

void write_model(Writer& w, const models::TrainedModel& m) {
  w.word("model").word(models::kind_name(m.kind)).newline();
  w.word("hyper").num(m.hyper.k).real(m.hyper.C).real(m.hyper.gamma).num(m.hyper.n_trees).num(m.hyper.max_depth).newline();
  w.word("norm").reals(m.norm.mean).reals(m.norm.std).newline();
  w.word("classes").ints(m.classes).newline();
  w.word("provenance").text(m.provenance).newline();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, models::KnnParams>) {
          w.word("knn").num(p.k).ints(p.y).matrix(p.X).newline();
        } else if constexpr (std::is_same_v<T, models::SvmParams>) {
          w.word("svm").real(p.C).real(p.gamma).ints(p.classes).num(static_cast<long long>(p.pairs.size())).newline();
          for (const auto& b : p.pairs)
            w.word("pair").num(b.positive).num(b.negative).real(b.rho).reals(b.coef).matrix(b.support).newline();
        } else {
          w.word("forest").ints(p.classes).num(p.max_depth).word(std::to_string(p.seed));
          w.num(static_cast<long long>(p.trees.size())).newline();
          for (const auto& t : p.trees) {
            w.word("tree").num(static_cast<long long>(t.nodes.size())).newline();
            for (const auto& n : t.nodes)
              w.num(n.feature).real(n.threshold).num(n.left).num(n.right).num(n.depth).ints(n.counts).newline();
          }
        }
      },
      m.params);
}

models::TrainedModel read_model(Reader& r) {
  models::TrainedModel m;
  r.expect("model");
  try {
    m.kind = models::parse_kind(std::string(r.word()));
  } catch (const Error&) {
    Reader::corrupt("unknown model kind");
  }
  r.expect("hyper");
  m.hyper.k = static_cast<int>(r.num());
  m.hyper.C = r.real();
  m.hyper.gamma = r.real();
  m.hyper.n_trees = static_cast<int>(r.num());
  m.hyper.max_depth = static_cast<int>(r.num());
  r.expect("norm");
  m.norm.mean = r.reals();
  m.norm.std = r.reals();
  r.expect("classes");
  m.classes = r.ints();
  r.expect("provenance");
  m.provenance = r.text();
  const auto tag = r.word();
  if (tag == "knn") {
    models::KnnParams p;
    p.k = static_cast<int>(r.num());
    p.y = r.ints();
    p.X = r.matrix();
    if (p.X.rows() != p.y.size()) Reader::corrupt("knn rows and labels differ");
    m.params = std::move(p);
  } else if (tag == "svm") {
    models::SvmParams p;
    p.C = r.real();
    p.gamma = r.real();
    p.classes = r.ints();
    const std::size_t n = r.count(1 << 20);
    for (std::size_t i = 0; i < n; ++i) {
      r.expect("pair");
      models::SvmBinary b;
      b.positive = static_cast<int>(r.num());
      b.negative = static_cast<int>(r.num());
      b.rho = r.real();
      b.coef = r.reals();
      b.support = r.matrix();
      if (b.support.rows() != b.coef.size()) Reader::corrupt("svm support rows and coefficients differ");
      p.pairs.push_back(std::move(b));
    }
    m.params = std::move(p);
  } else if (tag == "forest") {
    models::ForestParams p;
    p.classes = r.ints();
    p.max_depth = static_cast<int>(r.num());
    const auto seed = r.word();
    if (std::from_chars(seed.data(), seed.data() + seed.size(), p.seed).ec != std::errc()) Reader::corrupt("bad seed");
    const std::size_t nt = r.count(1 << 20);
    for (std::size_t t = 0; t < nt; ++t) {
      r.expect("tree");
      models::DecisionTree tree;
      const std::size_t nn = r.count(1 << 24);
      if (nn == 0) Reader::corrupt("empty tree");
      for (std::size_t i = 0; i < nn; ++i) {
        models::TreeNode n;
        n.feature = static_cast<int>(r.num());
        n.threshold = r.real();
        n.left = static_cast<int>(r.num());
        n.right = static_cast<int>(r.num());
        n.depth = static_cast<int>(r.num());
        n.counts = r.ints();
        if (n.counts.size() != p.classes.size()) Reader::corrupt("node class counts do not match the classes");
        if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || static_cast<std::size_t>(n.left) >= nn ||
                               static_cast<std::size_t>(n.right) >= nn))
          Reader::corrupt("node child index out of range");
        tree.nodes.push_back(std::move(n));
      }
      p.trees.push_back(std::move(tree));
    }
    m.params = std::move(p);
  } else {
    Reader::corrupt("unknown parameter block '" + std::string(tag) + "'");
  }
  return m;
}

void write_window(Writer& w, const dsp::WindowSpec& s) { w.real(s.length_s).real(s.overlap_fraction); }
dsp::WindowSpec read_window(Reader& r) {
  dsp::WindowSpec s;
  s.length_s = r.real();
  s.overlap_fraction = r.real();
  return s;
}

}  // namespace

std::string serialize_bundle(const hierarchy::ModelBundle& b) {
  Writer w;
  w.word("cascade");
  write_window(w, b.config.stage1_window);
  write_window(w, b.config.stage2_window);
  w.num(b.config.smooth_k_stage1).num(b.config.smooth_k_stage2).newline();
  const std::pair<const char*, const models::TrainedModel*> roles[] = {
      {b.has_stage1 ? "stage1" : nullptr, &b.stage1},
      {b.has_level1 ? "level1" : nullptr, &b.level1},
      {b.has_walking ? "walking" : nullptr, &b.walking},
      {b.has_standing ? "standing" : nullptr, &b.standing},
  };
  for (const auto& [role, model] : roles) {
    if (!role) continue;
    w.word("role").word(role).newline();
    write_model(w, *model);
  }
  w.word("end").newline();
  const std::string body = std::move(w).str();
  return "oep-bundle " + std::to_string(kBundleMajor) + "." + std::to_string(kBundleMinor) + "\nchecksum " +
         hex_u64(fnv1a(body)) + "\n" + body;
}

hierarchy::ModelBundle deserialize_bundle(const std::string& text) {
  const auto nl1 = text.find('\n');
  if (nl1 == std::string::npos || text.compare(0, 11, "oep-bundle ") != 0)
    fail(ErrorCategory::Integrity, "not a model bundle (missing 'oep-bundle' header)");
  const std::string version = text.substr(11, nl1 - 11);
  const auto dot = version.find('.');
  int major = -1;
  if (dot == std::string::npos ||
      std::from_chars(version.data(), version.data() + dot, major).ec != std::errc())
    fail(ErrorCategory::Integrity, "model bundle has a malformed version '" + version + "'");
  if (major != kBundleMajor)
    fail(ErrorCategory::Version, "model bundle version " + version + " is not supported (expected major version " +
                                     std::to_string(kBundleMajor) + ")");
  const auto nl2 = text.find('\n', nl1 + 1);
  const std::string_view header(text.data() + nl1 + 1, nl2 == std::string::npos ? 0 : nl2 - nl1 - 1);
  if (nl2 == std::string::npos || header.substr(0, 9) != "checksum ")
    fail(ErrorCategory::Integrity, "model bundle has no checksum line");
  const std::string_view body(text.data() + nl2 + 1, text.size() - nl2 - 1);
  if (header.substr(9) != hex_u64(fnv1a(body))) fail(ErrorCategory::Integrity, "model bundle checksum mismatch");

  Reader r(body);
  hierarchy::ModelBundle b;
  r.expect("cascade");
  b.config.stage1_window = read_window(r);
  b.config.stage2_window = read_window(r);
  b.config.smooth_k_stage1 = static_cast<int>(r.num());
  b.config.smooth_k_stage2 = static_cast<int>(r.num());
  for (;;) {
    const auto tag = r.word();
    if (tag == "end") break;
    if (tag != "role") Reader::corrupt("expected 'role' or 'end'");
    const auto role = std::string(r.word());
    auto model = read_model(r);
    if (role == "stage1") b.stage1 = std::move(model), b.has_stage1 = true;
    else if (role == "level1") b.level1 = std::move(model), b.has_level1 = true;
    else if (role == "walking") b.walking = std::move(model), b.has_walking = true;
    else if (role == "standing") b.standing = std::move(model), b.has_standing = true;
    else Reader::corrupt("unknown role '" + role + "'");
  }
  if (!r.at_end()) Reader::corrupt("trailing data after 'end'");
  try {
    b.config.validate();
  } catch (const Error& e) {
    Reader::corrupt(e.what());
  }
  return b;
}

void save_bundle(const hierarchy::ModelBundle& bundle, const fs::path& path) {
  write_atomic(path, serialize_bundle(bundle));
}

hierarchy::ModelBundle load_bundle(const fs::path& path) { return deserialize_bundle(read_file(path)); }

// ---------------------------------------------------------------- timeline

namespace {

const char* space_name(LabelSpace s) {
  switch (s) {
    case LabelSpace::Stage1: return "stage1";
    case LabelSpace::Level1: return "level1";
    case LabelSpace::Activity: return "activity";
  }
  return "activity";
}

int parse_label_in(LabelSpace space, std::string_view name, const std::string& where) {
  if (name == "unassigned") return kUnassigned;
  for (int c = 0; c < space_size(space); ++c)
    if (label_name(space, c) == name) return c;
  fail(ErrorCategory::Data, where + ": unknown label '" + std::string(name) + "' for space " + space_name(space));
}

}  // namespace

std::string format_timeline(const hierarchy::PredictionTimeline& tl) {
  std::string out;
  out += "# sample_rate_hz=" + format_double(tl.sample_rate_hz) + "\n";
  out += std::string("# space=") + space_name(tl.space) + "\n";
  out += std::string("# provenance=") + hierarchy::provenance_name(tl.provenance) + "\n";
  out += "# n_samples=" + std::to_string(tl.labels.size()) + "\n";
  out += "start_sample,end_sample,start_s,end_s,label\n";
  std::size_t b = 0;
  for (std::size_t i = 1; i <= tl.labels.size(); ++i) {
    if (i < tl.labels.size() && tl.labels[i] == tl.labels[b]) continue;
    out += std::to_string(b) + "," + std::to_string(i) + "," + format_double(static_cast<double>(b) / tl.sample_rate_hz) +
           "," + format_double(static_cast<double>(i) / tl.sample_rate_hz) + "," + label_name(tl.space, tl.labels[b]) +
           "\n";
    b = i;
  }
  return out;
}

hierarchy::PredictionTimeline parse_timeline(const std::string& text, const std::string& source) {
  hierarchy::PredictionTimeline tl;
  std::size_t n_samples = 0;
  bool have_rate = false, have_n = false, header = false;
  for (const auto& [no, line] : lines_of(text)) {
    const auto where = at(source, no);
    if (line.front() == '#') {
      const auto kv = trim(line.substr(1));
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = kv.substr(0, eq), value = kv.substr(eq + 1);
      if (key == "sample_rate_hz") {
        tl.sample_rate_hz = parse_double(value, where);
        have_rate = true;
      } else if (key == "space") {
        if (value == "stage1") tl.space = LabelSpace::Stage1;
        else if (value == "level1") tl.space = LabelSpace::Level1;
        else if (value == "activity") tl.space = LabelSpace::Activity;
        else fail(ErrorCategory::Data, where + ": unknown label space '" + std::string(value) + "'");
      } else if (key == "provenance") {
        if (value == "stage1_raw") tl.provenance = hierarchy::Provenance::Stage1Raw;
        else if (value == "stage1_smoothed") tl.provenance = hierarchy::Provenance::Stage1Smoothed;
        else if (value == "stage2_level1") tl.provenance = hierarchy::Provenance::Stage2Level1;
        else if (value == "stage2_level2") tl.provenance = hierarchy::Provenance::Stage2Level2;
        else fail(ErrorCategory::Data, where + ": unknown provenance '" + std::string(value) + "'");
      } else if (key == "n_samples") {
        n_samples = static_cast<std::size_t>(parse_double(value, where));
        have_n = true;
      }
      continue;
    }
    if (!header) {
      if (line != "start_sample,end_sample,start_s,end_s,label")
        fail(ErrorCategory::Data, where + ": expected header 'start_sample,end_sample,start_s,end_s,label'");
      header = true;
      if (!have_rate || !have_n) fail(ErrorCategory::Data, source + ": missing sample_rate_hz or n_samples");
      tl.labels.reserve(n_samples);
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 5) fail(ErrorCategory::Data, where + ": expected 5 fields");
    const auto b = static_cast<std::size_t>(parse_double(f[0], where));
    const auto e = static_cast<std::size_t>(parse_double(f[1], where));
    if (b != tl.labels.size() || e <= b || e > n_samples)
      fail(ErrorCategory::Data, where + ": runs must be contiguous, non-empty and inside the recording");
    tl.labels.insert(tl.labels.end(), e - b, parse_label_in(tl.space, trim(f[4]), where));
  }
  if (!header) fail(ErrorCategory::Data, source + ": missing header");
  if (tl.labels.size() != n_samples) fail(ErrorCategory::Data, source + ": runs do not cover n_samples");
  if (!(tl.sample_rate_hz > 0)) fail(ErrorCategory::Data, source + ": sample_rate_hz must be positive");
  return tl;
}

// ---------------------------------------------------------------- config

RunConfig parse_config(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    fail(ErrorCategory::Config, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCategory::Config, "config must be a JSON object");
  RunConfig c;
  auto number = [&](const std::string& key, const ordered_json& v) {
    if (!v.is_number()) fail(ErrorCategory::Config, "config key '" + key + "' must be a number");
    return v.get<double>();
  };
  auto integer = [&](const std::string& key, const ordered_json& v) {
    if (!v.is_number_integer()) fail(ErrorCategory::Config, "config key '" + key + "' must be an integer");
    return v.get<long long>();
  };
  auto string = [&](const std::string& key, const ordered_json& v) {
    if (!v.is_string()) fail(ErrorCategory::Config, "config key '" + key + "' must be a string");
    return v.get<std::string>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "stage1_window_s") c.cascade.stage1_window.length_s = number(key, v);
    else if (key == "stage1_overlap") c.cascade.stage1_window.overlap_fraction = number(key, v);
    else if (key == "stage2_window_s") c.cascade.stage2_window.length_s = number(key, v);
    else if (key == "stage2_overlap") c.cascade.stage2_window.overlap_fraction = number(key, v);
    else if (key == "smooth_k_stage1") c.cascade.smooth_k_stage1 = static_cast<int>(integer(key, v));
    else if (key == "smooth_k_stage2") c.cascade.smooth_k_stage2 = static_cast<int>(integer(key, v));
    else if (key == "model") {
      try {
        c.kind = models::parse_kind(string(key, v));
      } catch (const Error& e) {
        fail(ErrorCategory::Config, e.what());
      }
    } else if (key == "dataset_policy") c.dataset_policy = cv::parse_dataset_policy(string(key, v));
    else if (key == "transitions") c.transitions = eval::parse_policy(string(key, v));
    else if (key == "iou_thresholds") {
      if (!v.is_array() || v.empty()) fail(ErrorCategory::Config, "iou_thresholds must be a non-empty array");
      c.iou_thresholds.clear();
      for (const auto& t : v) c.iou_thresholds.push_back(number(key, t));
    } else if (key == "seed") {
      const auto s = integer(key, v);
      if (s < 0) fail(ErrorCategory::Config, "seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "jobs") c.jobs = static_cast<int>(integer(key, v));
    else fail(ErrorCategory::Config, "unknown config key '" + key + "'");
  }
  try {
    c.cascade.validate();
  } catch (const Error& e) {
    fail(ErrorCategory::Config, e.what());
  }
  for (double t : c.iou_thresholds)
    if (!(t > 0) || t > 1) fail(ErrorCategory::Config, "IoU thresholds must lie in (0, 1]");
  if (c.jobs < 1) fail(ErrorCategory::Config, "jobs must be >= 1");
  return c;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["stage1_window_s"] = c.cascade.stage1_window.length_s;
  j["stage1_overlap"] = c.cascade.stage1_window.overlap_fraction;
  j["stage2_window_s"] = c.cascade.stage2_window.length_s;
  j["stage2_overlap"] = c.cascade.stage2_window.overlap_fraction;
  j["smooth_k_stage1"] = c.cascade.smooth_k_stage1;
  j["smooth_k_stage2"] = c.cascade.smooth_k_stage2;
  j["model"] = models::kind_name(c.kind);
  j["dataset_policy"] = cv::policy_name(c.dataset_policy);
  j["transitions"] = eval::policy_name(c.transitions);
  j["iou_thresholds"] = c.iou_thresholds;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  return j;
}

// ---------------------------------------------------------------- reports

ordered_json to_json(const eval::EvalReport& r) {
  ordered_json j;
  j["space"] = space_name(r.space);
  j["transitions_as_fp"] = r.policy == eval::TransitionPolicy::CountAsFp;
  j["n_windows"] = r.n_windows;
  j["weighted_f1"] = r.weighted_f1;
  ordered_json classes = ordered_json::array();
  for (const auto& c : r.window) {
    ordered_json e;
    e["label"] = label_name(r.space, c.label);
    e["support"] = c.support();
    e["tp"] = c.counts.tp;
    e["fp"] = c.counts.fp;
    e["fn"] = c.counts.fn;
    e["precision"] = c.precision;
    e["recall"] = c.recall;
    e["f1"] = c.f1;
    classes.push_back(std::move(e));
  }
  j["window"] = std::move(classes);
  ordered_json seg = ordered_json::array();
  for (const auto& s : r.segmental) {
    ordered_json t;
    t["threshold"] = s.threshold;
    ordered_json cls = ordered_json::array();
    for (const auto& c : s.classes) {
      ordered_json e;
      e["label"] = label_name(r.space, c.label);
      e["n_pred"] = c.n_pred;
      e["n_true"] = c.n_true;
      e["tp"] = c.tp;
      e["fp"] = c.fp;
      e["fn"] = c.fn;
      e["precision"] = c.precision;
      e["recall"] = c.recall;
      e["f1"] = c.f1;
      cls.push_back(std::move(e));
    }
    t["classes"] = std::move(cls);
    seg.push_back(std::move(t));
  }
  j["segmental"] = std::move(seg);
  return j;
}

std::string report_csv(const eval::EvalReport& r) {
  std::string out = "kind,threshold,label,support,tp,fp,fn,precision,recall,f1\n";
  for (const auto& c : r.window)
    out += "window,," + label_name(r.space, c.label) + "," + std::to_string(c.support()) + "," +
           std::to_string(c.counts.tp) + "," + std::to_string(c.counts.fp) + "," + std::to_string(c.counts.fn) + "," +
           format_double(c.precision) + "," + format_double(c.recall) + "," + format_double(c.f1) + "\n";
  for (const auto& s : r.segmental)
    for (const auto& c : s.classes)
      out += "segment," + format_double(s.threshold) + "," + label_name(r.space, c.label) + "," +
             std::to_string(c.n_true) + "," + std::to_string(c.tp) + "," + std::to_string(c.fp) + "," +
             std::to_string(c.fn) + "," + format_double(c.precision) + "," + format_double(c.recall) + "," +
             format_double(c.f1) + "\n";
  out += "weighted_f1,,,,,,,,," + format_double(r.weighted_f1) + "\n";
  return out;
}

namespace {

ordered_json hyper_json(models::ModelKind kind, const models::Hyperparams& h) {
  ordered_json j;
  switch (kind) {
    case models::ModelKind::Knn: j["k"] = h.k; break;
    case models::ModelKind::SvmRbf:
      j["C"] = h.C;
      j["gamma"] = h.gamma;
      break;
    case models::ModelKind::RandomForest:
      j["n_trees"] = h.n_trees;
      j["max_depth"] = h.max_depth;
      break;
  }
  return j;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0, 0};
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

double class_f1(const eval::EvalReport& r, int label) {
  for (const auto& c : r.window)
    if (c.label == label) return c.f1;
  return 0;
}

}  // namespace

ordered_json to_json(const cv::PipelineCvResult& r, models::ModelKind kind) {
  ordered_json j;
  j["model"] = models::kind_name(kind);
  ordered_json folds = ordered_json::array();
  std::vector<double> s1, s2;
  for (const auto& f : r.folds) {
    ordered_json fj;
    fj["test_subject"] = f.test_subject;
    ordered_json roles = ordered_json::object();
    for (const auto& rs : f.roles) {
      ordered_json rj;
      rj["trained"] = rs.trained;
      if (rs.trained) {
        rj["hyperparameters"] = hyper_json(kind, rs.selection.chosen);
        rj["inner_mean_weighted_f1"] = rs.selection.mean_f1;
        rj["inner_folds_used"] = rs.selection.inner_folds_used;
      }
      roles[hierarchy::role_name(rs.role)] = std::move(rj);
    }
    fj["roles"] = std::move(roles);
    fj["warnings"] = f.warnings;
    fj["stage1"] = to_json(f.stage1);
    fj["stage2_skipped"] = f.stage2_skipped;
    if (!f.stage2_skipped) fj["stage2"] = to_json(f.stage2);
    folds.push_back(std::move(fj));
    if (!f.stage1_truth.empty()) s1.push_back(class_f1(f.stage1, kStage1Oep));
    if (!f.stage2_skipped) s2.push_back(f.stage2.weighted_f1);
  }
  j["folds"] = std::move(folds);
  ordered_json agg;
  agg["stage1_oep_f1"] = r.stage1_oep_f1;
  const auto [m1, sd1] = mean_std(s1);
  agg["stage1_oep_f1_fold_mean"] = m1;
  agg["stage1_oep_f1_fold_std"] = sd1;
  agg["stage2_weighted_f1"] = r.stage2.weighted_f1;
  const auto [m2, sd2] = mean_std(s2);
  agg["stage2_weighted_f1_fold_mean"] = m2;
  agg["stage2_weighted_f1_fold_std"] = sd2;
  agg["stage1"] = to_json(r.stage1);
  agg["stage2"] = to_json(r.stage2);
  j["aggregate"] = std::move(agg);
  return j;
}

std::string cv_summary_csv(const cv::PipelineCvResult& r, models::ModelKind kind) {
  std::string out = "test_subject,role,hyperparameters,inner_mean_weighted_f1,stage1_oep_f1,stage2_weighted_f1\n";
  for (const auto& f : r.folds)
    for (const auto& rs : f.roles)
      out += f.test_subject + "," + hierarchy::role_name(rs.role) + "," +
             (rs.trained ? "\"" + models::describe(kind, rs.selection.chosen) + "\"" : std::string("untrained")) + "," +
             format_double(rs.selection.mean_f1) + "," + format_double(class_f1(f.stage1, kStage1Oep)) + "," +
             (f.stage2_skipped ? std::string() : format_double(f.stage2.weighted_f1)) + "\n";
  out += "pooled,,,," + format_double(r.stage1_oep_f1) + "," + format_double(r.stage2.weighted_f1) + "\n";
  return out;
}

std::string features_csv(const hierarchy::SessionWindows& w, features::Stage stage) {
  const bool s2 = stage == features::Stage::Stage2;
  const auto& sw = s2 ? w.stage2 : w.stage1;
  const auto space = s2 ? LabelSpace::Activity : LabelSpace::Stage1;
  std::string out = "subject,start_s,label,pure";
  for (const auto& n : features::feature_names(stage)) out += "," + n;
  out += "\n";
  if (s2 && !w.annotated_oep) fail(ErrorCategory::Data, "session '" + w.subject_id + "' has no annotated exercise span");
  const models::Matrix X = s2 ? hierarchy::with_relative_start(sw, w.sample_rate_hz, *w.annotated_oep) : sw.X;
  for (std::size_t i = 0; i < sw.size(); ++i) {
    out += w.subject_id + "," + format_double(static_cast<double>(sw.starts[i]) / w.sample_rate_hz) + "," +
           label_name(space, sw.truth[i].label) + "," + (sw.truth[i].pure ? "1" : "0");
    for (double v : X.row(i)) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

}  // namespace oep::io
