#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dic/qp.hpp"

namespace dic::qp {

namespace {

constexpr const char* kMagic = "dic-qp";
constexpr int kVersion = 1;

void write_triplets(std::ostream& out, const char* tag, const SparseMatrix& m) {
  out << tag << ' ' << m.nonZeros() << '\n';
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

void write_vector(std::ostream& out, const char* tag, const Vector& v) {
  out << tag << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
  out << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string token() {
    std::string t;
    if (!(in_ >> t)) throw std::runtime_error("QP file: unexpected end of input");
    return t;
  }

  void expect(const std::string& tag) {
    const auto t = token();
    if (t != tag) throw std::runtime_error("QP file: expected '" + tag + "', found '" + t + "'");
  }

  long integer() {
    const auto t = token();
    try {
      return std::stol(t);
    } catch (const std::exception&) {
      throw std::runtime_error("QP file: expected an integer, found '" + t + "'");
    }
  }

  double number() {
    const auto t = token();
    try {
      return std::stod(t);
    } catch (const std::exception&) {
      throw std::runtime_error("QP file: expected a number, found '" + t + "'");
    }
  }

  SparseMatrix triplets(const char* tag, Eigen::Index rows, Eigen::Index cols) {
    expect(tag);
    const long nnz = integer();
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(nnz));
    for (long k = 0; k < nnz; ++k) {
      const long i = integer();
      const long j = integer();
      const double v = number();
      if (i < 0 || i >= rows || j < 0 || j >= cols)
        throw std::runtime_error(std::string("QP file: ") + tag + " entry out of range");
      t.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
    }
    SparseMatrix m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  Vector vector(const char* tag, Eigen::Index size) {
    expect(tag);
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) v[i] = number();
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

void write_problem(std::ostream& out, const QpProblem& p) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  out << kMagic << ' ' << kVersion << '\n';
  out << "n " << p.num_vars() << " eq " << p.num_eq() << " ineq " << p.num_ineq() << '\n';
  write_triplets(out, "Q", p.Q);
  write_vector(out, "q", p.q);
  write_triplets(out, "A", p.A);
  write_vector(out, "b", p.b);
  write_triplets(out, "C", p.C);
  write_vector(out, "l", p.l);
  write_vector(out, "u", p.u);
  if (!p.variable_names.empty()) {
    out << "names\n";
    for (std::size_t i = 0; i < p.variable_names.size(); ++i) out << (i ? " " : "") << p.variable_names[i];
    out << '\n';
  }
  out << "end\n";
  out.flags(flags);
  out.precision(precision);
}

QpProblem read_problem(std::istream& in) {
  Reader r(in);
  r.expect(kMagic);
  if (r.integer() != kVersion) throw std::runtime_error("QP file: unsupported version");
  r.expect("n");
  const long n = r.integer();
  r.expect("eq");
  const long me = r.integer();
  r.expect("ineq");
  const long mi = r.integer();
  if (n < 0 || me < 0 || mi < 0) throw std::runtime_error("QP file: negative dimension");
  QpProblem p;
  p.Q = r.triplets("Q", n, n);
  p.q = r.vector("q", n);
  p.A = r.triplets("A", me, n);
  p.b = r.vector("b", me);
  p.C = r.triplets("C", mi, n);
  p.l = r.vector("l", mi);
  p.u = r.vector("u", mi);
  auto tag = r.token();
  if (tag == "names") {
    for (long i = 0; i < n; ++i) p.variable_names.push_back(r.token());
    tag = r.token();
  }
  if (tag != "end") throw std::runtime_error("QP file: expected 'end', found '" + tag + "'");
  p.validate();
  return p;
}

}  // namespace dic::qp
