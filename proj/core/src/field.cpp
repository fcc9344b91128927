#include "fracinterp/field.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fracinterp/errors.hpp"
#include "fracinterp/mesh.hpp"
#include "fracinterp/partition.hpp"

namespace fracinterp {

namespace detail {

struct FieldImpl {
  std::string id;
  virtual ~FieldImpl() = default;
  [[nodiscard]] virtual FieldValue eval(Point2 x) const = 0;
  [[nodiscard]] virtual bool constant() const { return false; }
  [[nodiscard]] virtual std::optional<bool> in_w1p(double) const { return true; }
};

}  // namespace detail

namespace {

using detail::FieldImpl;
constexpr double kPi = std::numbers::pi;

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

struct ConstantImpl final : FieldImpl {
  double c;
  explicit ConstantImpl(double c_) : c(c_) { id = "const " + fmt(c); }
  FieldValue eval(Point2) const override { return {c, {}}; }
  bool constant() const override { return true; }
};

struct LinearImpl final : FieldImpl {
  double a, b, c;
  LinearImpl(double a_, double b_, double c_) : a(a_), b(b_), c(c_) {
    id = "linear " + fmt(a) + " " + fmt(b) + " " + fmt(c);
  }
  FieldValue eval(Point2 x) const override { return {a * x.x + b * x.y + c, {a, b}}; }
  bool constant() const override { return a == 0.0 && b == 0.0; }
};

double angle_0_2pi(Point2 x) {
  const double t = std::atan2(x.y, x.x);
  return t < 0.0 ? t + 2.0 * kPi : t;
}

struct SlitAngleImpl final : FieldImpl {
  SlitAngleImpl() { id = "slit_angle"; }
  FieldValue eval(Point2 x) const override {
    const double theta = angle_0_2pi(x);
    if (theta <= 0.5 * kPi) return {1.0, {}};
    if (theta >= 1.5 * kPi) return {0.0, {}};
    const double t = (theta - 0.5 * kPi) / kPi;
    const double value = 1.0 - (3.0 * t * t - 2.0 * t * t * t);
    const double dtheta = -(6.0 * t - 6.0 * t * t) / kPi;
    const double r2 = x.x * x.x + x.y * x.y;
    return {value, Point2{-x.y, x.x} * (dtheta / r2)};
  }
  std::optional<bool> in_w1p(double p) const override { return p < 2.0; }
};

struct BumpImpl final : FieldImpl {
  Point2 c;
  double R;
  BumpImpl(Point2 c_, double R_) : c(c_), R(R_) {
    id = "bump " + fmt(c.x) + " " + fmt(c.y) + " " + fmt(R);
  }
  FieldValue eval(Point2 x) const override {
    const Point2 d = (x - c) / R;
    const double rho2 = dot(d, d);
    if (rho2 >= 1.0) return {};
    const double q = 1.0 - rho2;
    const double v = std::exp(1.0 - 1.0 / q);
    // d/dx exp(1 - 1/(1 - rho^2)) = v * (-2 rho / q^2) * d rho/dx
    return {v, d * (-2.0 * v / (q * q * R))};
  }
};

struct HatImpl final : FieldImpl {
  Point2 c;
  double w;
  HatImpl(Point2 c_, double w_) : c(c_), w(w_) {
    id = "hat " + fmt(c.x) + " " + fmt(c.y) + " " + fmt(w);
  }
  FieldValue eval(Point2 x) const override {
    const double u = (x.x - c.x) / w, v = (x.y - c.y) / w;
    const double cand[3] = {std::abs(u), std::abs(v), std::abs(u - v)};
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (cand[i] > cand[k]) k = i;
    const double value = 1.0 - cand[k];
    if (value <= 0.0) return {};
    Point2 g;
    if (k == 0) g = {-std::copysign(1.0, u), 0.0};
    if (k == 1) g = {0.0, -std::copysign(1.0, v)};
    if (k == 2) g = Point2{-1.0, 1.0} * std::copysign(1.0, u - v);
    return {value, g / w};
  }
};

// --- expressions ---------------------------------------------------------------

struct Dual {
  double v = 0.0;
  double dx = 0.0;
  double dy = 0.0;
};

Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.dx + b.dx, a.dy + b.dy}; }
Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.dx - b.dx, a.dy - b.dy}; }
Dual operator*(Dual a, Dual b) {
  return {a.v * b.v, a.dx * b.v + a.v * b.dx, a.dy * b.v + a.v * b.dy};
}
Dual operator/(Dual a, Dual b) {
  const double inv = 1.0 / b.v;
  return {a.v * inv, (a.dx * b.v - a.v * b.dx) * inv * inv, (a.dy * b.v - a.v * b.dy) * inv * inv};
}
Dual chain(Dual a, double value, double deriv) { return {value, deriv * a.dx, deriv * a.dy}; }

enum class Op : unsigned char {
  constant, var_x, var_y, var_r, var_theta, add, sub, mul, div, pow, neg,
  sin, cos, exp, log, sqrt, tanh, abs
};

struct Instr {
  Op op;
  double value = 0.0;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  std::vector<Instr> run() {
    parse_sum();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return std::move(code_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("expr: " + what + " at column " + std::to_string(pos_ + 1) + " in '" +
                          s_ + "'");
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void parse_sum() {
    parse_product();
    while (true) {
      if (accept('+')) {
        parse_product();
        code_.push_back({Op::add});
      } else if (accept('-')) {
        parse_product();
        code_.push_back({Op::sub});
      } else {
        return;
      }
    }
  }
  void parse_product() {
    parse_unary();
    while (true) {
      if (accept('*')) {
        parse_unary();
        code_.push_back({Op::mul});
      } else if (accept('/')) {
        parse_unary();
        code_.push_back({Op::div});
      } else {
        return;
      }
    }
  }
  void parse_unary() {
    if (accept('-')) {
      parse_unary();
      code_.push_back({Op::neg});
    } else if (accept('+')) {
      parse_unary();
    } else {
      parse_power();
    }
  }
  void parse_power() {
    parse_primary();
    if (accept('^')) {
      parse_unary();
      code_.push_back({Op::pow});
    }
  }
  void parse_primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      const double v = std::stod(s_.substr(pos_), &used);
      pos_ += used;
      code_.push_back({Op::constant, v});
      return;
    }
    if (accept('(')) {
      parse_sum();
      if (!accept(')')) fail("expected ')'");
      return;
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected character '" + std::string(1, c) + "'");
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    const std::string name = s_.substr(start, pos_ - start);
    if (name == "x") return code_.push_back({Op::var_x});
    if (name == "y") return code_.push_back({Op::var_y});
    if (name == "r") return code_.push_back({Op::var_r});
    if (name == "theta") return code_.push_back({Op::var_theta});
    if (name == "pi") return code_.push_back({Op::constant, kPi});
    static const std::pair<const char*, Op> funcs[] = {
        {"sin", Op::sin}, {"cos", Op::cos}, {"exp", Op::exp}, {"log", Op::log},
        {"sqrt", Op::sqrt}, {"tanh", Op::tanh}, {"abs", Op::abs}};
    for (const auto& [fname, op] : funcs) {
      if (name != fname) continue;
      if (!accept('(')) fail("expected '(' after " + name);
      parse_sum();
      if (!accept(')')) fail("expected ')'");
      code_.push_back({op});
      return;
    }
    pos_ = start;
    fail("unknown identifier '" + name + "'");
  }

  std::string s_;
  std::size_t pos_ = 0;
  std::vector<Instr> code_;
};

struct ExprImpl final : FieldImpl {
  std::vector<Instr> code;
  bool uses_polar = false;
  int depth = 0;

  explicit ExprImpl(const std::string& text) : code(Parser(text).run()) {
    id = "expr " + text;
    int d = 0;
    for (const auto& in : code) {
      switch (in.op) {
        case Op::constant: case Op::var_x: case Op::var_y: ++d; break;
        case Op::var_r: case Op::var_theta: ++d; uses_polar = true; break;
        case Op::add: case Op::sub: case Op::mul: case Op::div: case Op::pow: --d; break;
        default: break;
      }
      depth = std::max(depth, d);
    }
  }

  FieldValue eval(Point2 x) const override {
    constexpr int kInline = 32;
    Dual inline_stack[kInline];
    std::vector<Dual> heap;
    Dual* st = inline_stack;
    if (depth > kInline) {
      heap.resize(depth);
      st = heap.data();
    }
    int top = -1;
    for (const auto& in : code) {
      switch (in.op) {
        case Op::constant: st[++top] = {in.value, 0, 0}; break;
        case Op::var_x: st[++top] = {x.x, 1, 0}; break;
        case Op::var_y: st[++top] = {x.y, 0, 1}; break;
        case Op::var_r: {
          const double r = std::hypot(x.x, x.y);
          st[++top] = r > 0.0 ? Dual{r, x.x / r, x.y / r} : Dual{};
          break;
        }
        case Op::var_theta: {
          const double r2 = x.x * x.x + x.y * x.y;
          st[++top] = r2 > 0.0 ? Dual{angle_0_2pi(x), -x.y / r2, x.x / r2} : Dual{};
          break;
        }
        case Op::add: --top; st[top] = st[top] + st[top + 1]; break;
        case Op::sub: --top; st[top] = st[top] - st[top + 1]; break;
        case Op::mul: --top; st[top] = st[top] * st[top + 1]; break;
        case Op::div: --top; st[top] = st[top] / st[top + 1]; break;
        case Op::pow: {
          --top;
          const Dual a = st[top], b = st[top + 1];
          const double v = std::pow(a.v, b.v);
          if (b.dx == 0.0 && b.dy == 0.0) {
            const double d = b.v == 0.0 ? 0.0 : b.v * std::pow(a.v, b.v - 1.0);
            st[top] = chain(a, v, d);
          } else {
            const double la = std::log(a.v);
            const double ddx = v * (b.dx * la + b.v * a.dx / a.v);
            const double ddy = v * (b.dy * la + b.v * a.dy / a.v);
            st[top] = {v, ddx, ddy};
          }
          break;
        }
        case Op::neg: st[top] = {-st[top].v, -st[top].dx, -st[top].dy}; break;
        case Op::sin: st[top] = chain(st[top], std::sin(st[top].v), std::cos(st[top].v)); break;
        case Op::cos: st[top] = chain(st[top], std::cos(st[top].v), -std::sin(st[top].v)); break;
        case Op::exp: {
          const double e = std::exp(st[top].v);
          st[top] = chain(st[top], e, e);
          break;
        }
        case Op::log: st[top] = chain(st[top], std::log(st[top].v), 1.0 / st[top].v); break;
        case Op::sqrt: {
          const double s = std::sqrt(st[top].v);
          st[top] = chain(st[top], s, s > 0.0 ? 0.5 / s : 0.0);
          break;
        }
        case Op::tanh: {
          const double t = std::tanh(st[top].v);
          st[top] = chain(st[top], t, 1.0 - t * t);
          break;
        }
        case Op::abs:
          st[top] = chain(st[top], std::abs(st[top].v), st[top].v < 0.0 ? -1.0 : 1.0);
          break;
      }
    }
    return {st[0].v, {st[0].dx, st[0].dy}};
  }
  bool constant() const override {
    for (const auto& in : code)
      if (in.op == Op::var_x || in.op == Op::var_y || in.op == Op::var_r || in.op == Op::var_theta)
        return false;
    return true;
  }
  std::optional<bool> in_w1p(double) const override {
    if (uses_polar) return std::nullopt;
    return true;
  }
};

struct DiscreteImpl final : FieldImpl {
  std::shared_ptr<const PartitionOfUnity> pu;
  std::vector<double> coeffs;
  DiscreteImpl(std::shared_ptr<const PartitionOfUnity> pu_, std::vector<double> c)
      : pu(std::move(pu_)), coeffs(std::move(c)) {
    if (coeffs.size() != pu->size())
      throw ValidationError("discrete field: coefficient count does not match the partition");
    id = "discrete";
  }
  FieldValue eval(Point2 x) const override {
    const int c = pu->locate(x);
    if (c < 0) return {};
    std::array<PuEntry, 3> e;
    const int n = pu->eval(c, x, e);
    FieldValue out;
    for (int k = 0; k < n; ++k) {
      out.value += coeffs[e[k].index] * e[k].value;
      out.gradient += coeffs[e[k].index] * e[k].gradient;
    }
    return out;
  }
};

struct ScaledImpl final : FieldImpl {
  std::shared_ptr<const FieldImpl> f;
  double c;
  ScaledImpl(std::shared_ptr<const FieldImpl> f_, double c_) : f(std::move(f_)), c(c_) {
    id = "scaled " + fmt(c) + " (" + f->id + ")";
  }
  FieldValue eval(Point2 x) const override {
    const auto v = f->eval(x);
    return {c * v.value, c * v.gradient};
  }
  bool constant() const override { return c == 0.0 || f->constant(); }
  std::optional<bool> in_w1p(double p) const override {
    return c == 0.0 ? std::optional<bool>(true) : f->in_w1p(p);
  }
};

struct TranslatedImpl final : FieldImpl {
  std::shared_ptr<const FieldImpl> f;
  Point2 shift;
  TranslatedImpl(std::shared_ptr<const FieldImpl> f_, Point2 s) : f(std::move(f_)), shift(s) {
    id = "translated " + fmt(s.x) + " " + fmt(s.y) + " (" + f->id + ")";
  }
  FieldValue eval(Point2 x) const override { return f->eval(x - shift); }
  bool constant() const override { return f->constant(); }
  std::optional<bool> in_w1p(double p) const override { return f->in_w1p(p); }
};

struct DifferenceImpl final : FieldImpl {
  std::shared_ptr<const FieldImpl> f, g;
  DifferenceImpl(std::shared_ptr<const FieldImpl> f_, std::shared_ptr<const FieldImpl> g_)
      : f(std::move(f_)), g(std::move(g_)) {
    id = "(" + f->id + ") - (" + g->id + ")";
  }
  FieldValue eval(Point2 x) const override {
    const auto a = f->eval(x), b = g->eval(x);
    return {a.value - b.value, a.gradient - b.gradient};
  }
  std::optional<bool> in_w1p(double p) const override {
    const auto a = f->in_w1p(p), b = g->in_w1p(p);
    if (a && b) return *a && *b ? std::optional<bool>(true) : std::nullopt;
    return std::nullopt;
  }
};

}  // namespace

FieldFn::FieldFn() : FieldFn(constant(0.0)) {}
FieldFn::FieldFn(std::shared_ptr<const detail::FieldImpl> impl) : impl_(std::move(impl)) {}

FieldFn FieldFn::constant(double c) { return FieldFn(std::make_shared<ConstantImpl>(c)); }
FieldFn FieldFn::linear(double a, double b, double c) {
  return FieldFn(std::make_shared<LinearImpl>(a, b, c));
}
FieldFn FieldFn::slit_angle() { return FieldFn(std::make_shared<SlitAngleImpl>()); }
FieldFn FieldFn::bump(Point2 center, double radius) {
  if (!(radius > 0.0)) throw ValidationError("bump: radius must be positive");
  return FieldFn(std::make_shared<BumpImpl>(center, radius));
}
FieldFn FieldFn::hat(Point2 center, double width) {
  if (!(width > 0.0)) throw ValidationError("hat: width must be positive");
  return FieldFn(std::make_shared<HatImpl>(center, width));
}
FieldFn FieldFn::expression(const std::string& text) {
  return FieldFn(std::make_shared<ExprImpl>(text));
}
FieldFn FieldFn::discrete(std::shared_ptr<const PartitionOfUnity> pu, std::vector<double> coeffs) {
  return FieldFn(std::make_shared<DiscreteImpl>(std::move(pu), std::move(coeffs)));
}

FieldFn FieldFn::parse(const std::string& id) {
  std::istringstream is(id);
  std::string kind;
  is >> kind;
  auto numbers = [&](int n) {
    std::vector<double> v(n);
    for (auto& x : v)
      if (!(is >> x)) throw ValidationError("field '" + id + "': expected " + std::to_string(n) +
                                            " numbers after '" + kind + "'");
    std::string extra;
    if (is >> extra) throw ValidationError("field '" + id + "': trailing input '" + extra + "'");
    return v;
  };
  if (kind == "const" || kind == "constant") return constant(numbers(1)[0]);
  if (kind == "linear") {
    const auto v = numbers(3);
    return linear(v[0], v[1], v[2]);
  }
  if (kind == "slit_angle") {
    numbers(0);
    return slit_angle();
  }
  if (kind == "bump") {
    const auto v = numbers(3);
    return bump({v[0], v[1]}, v[2]);
  }
  if (kind == "hat") {
    const auto v = numbers(3);
    return hat({v[0], v[1]}, v[2]);
  }
  if (kind == "expr") {
    std::string rest;
    std::getline(is, rest);
    const auto first = rest.find_first_not_of(' ');
    if (first == std::string::npos) throw ValidationError("field '" + id + "': empty expression");
    return expression(rest.substr(first));
  }
  throw ValidationError("unknown field '" + id +
                        "' (expected const, linear, slit_angle, bump, hat or expr)");
}

FieldFn FieldFn::scaled(double c) const { return FieldFn(std::make_shared<ScaledImpl>(impl_, c)); }
FieldFn FieldFn::translated(Point2 shift) const {
  return FieldFn(std::make_shared<TranslatedImpl>(impl_, shift));
}
FieldFn FieldFn::minus(const FieldFn& g) const {
  return FieldFn(std::make_shared<DifferenceImpl>(impl_, g.impl_));
}

double FieldFn::operator()(Point2 x) const { return impl_->eval(x).value; }
FieldValue FieldFn::eval(Point2 x) const { return impl_->eval(x); }
const std::string& FieldFn::id() const { return impl_->id; }
bool FieldFn::is_constant() const { return impl_->constant(); }
std::optional<bool> FieldFn::in_w1p(double p) const { return impl_->in_w1p(p); }

std::vector<double> nodal_interpolant(const FieldFn& f, const Mesh& mesh) {
  std::vector<double> out(mesh.vertices.size());
  std::vector<Point2> toward(mesh.vertices.size(), Point2{});
  std::vector<int> count(mesh.vertices.size(), 0);
  const bool tagged = !mesh.duplicates.empty();
  if (tagged) {
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const Point2 c = mesh.triangle(t).centroid();
      for (int v : mesh.triangles[t]) {
        toward[v] += c;
        ++count[v];
      }
    }
  }
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    Point2 x = mesh.vertices[v];
    const bool sided = v < mesh.side_tags.size() && mesh.side_tags[v] != SideTag::none;
    if (sided && count[v] > 0) {
      const Point2 dir = toward[v] / count[v] - x;
      x += (1e-9 * mesh.target_scale / norm(dir)) * dir;
    }
    out[v] = f(x);
  }
  return out;
}

}  // namespace fracinterp
