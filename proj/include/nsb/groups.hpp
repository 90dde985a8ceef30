#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsb {

inline int64_t iabs(int64_t x) { return x < 0 ? -x : x; }

enum class GroupKind { Z, Zd, FreeProdZ_Za };

struct GroupSpec {
    GroupKind kind = GroupKind::Z;
    int d = 1;
    int a = 2;

    bool operator==(const GroupSpec&) const = default;
};

// One syllable of a reduced word in Z * Z/aZ: either t^e (e != 0) or s^e (0 < e < a).
struct Syllable {
    bool torsion = false;
    int64_t e = 0;
    auto operator<=>(const Syllable&) const = default;
};

struct Element {
    std::vector<int64_t> coords;   // Z and Z^d
    std::vector<Syllable> word;    // free product normal form
    auto operator<=>(const Element&) const = default;
};

inline Element z_elem(int64_t n) { return Element{{n}, {}}; }

class Group {
public:
    explicit Group(GroupSpec spec) : spec_(spec) {
        if (spec_.kind == GroupKind::Z) spec_.d = 1;
        if (spec_.kind == GroupKind::Zd && spec_.d < 1)
            throw std::invalid_argument("Zd requires d >= 1");
        if (spec_.kind == GroupKind::FreeProdZ_Za && spec_.a < 2)
            throw std::invalid_argument("free product requires a >= 2");
    }

    const GroupSpec& spec() const { return spec_; }
    bool free_product() const { return spec_.kind == GroupKind::FreeProdZ_Za; }
    int rank() const { return free_product() ? 0 : spec_.d; }

    Element identity() const {
        if (free_product()) return Element{};
        return Element{std::vector<int64_t>(spec_.d, 0), {}};
    }

    bool contains(const Element& g) const {
        if (free_product()) {
            if (!g.coords.empty()) return false;
            for (size_t i = 0; i < g.word.size(); ++i) {
                const auto& s = g.word[i];
                if (s.torsion ? (s.e <= 0 || s.e >= spec_.a) : s.e == 0) return false;
                if (i > 0 && g.word[i - 1].torsion == s.torsion) return false;
            }
            return true;
        }
        return g.word.empty() && static_cast<int>(g.coords.size()) == spec_.d;
    }

    Element mul(const Element& x, const Element& y) const {
        check(x);
        check(y);
        if (!free_product()) {
            Element r = x;
            for (int i = 0; i < spec_.d; ++i) r.coords[i] += y.coords[i];
            return r;
        }
        Element r = x;
        for (const auto& s : y.word) push_reduce(r.word, s);
        return r;
    }

    Element inv(const Element& x) const {
        check(x);
        if (!free_product()) {
            Element r = x;
            for (auto& c : r.coords) c = -c;
            return r;
        }
        Element r;
        for (auto it = x.word.rbegin(); it != x.word.rend(); ++it)
            r.word.push_back(it->torsion ? Syllable{true, spec_.a - it->e} : Syllable{false, -it->e});
        return r;
    }

    // Generators: t and s for the free product, unit vectors for Z^d.
    Element t_pow(int64_t n) const {
        if (!free_product()) throw std::invalid_argument("t_pow is for the free product");
        Element r;
        if (n != 0) r.word.push_back({false, n});
        return r;
    }
    Element s_pow(int64_t k) const {
        if (!free_product()) throw std::invalid_argument("s_pow is for the free product");
        Element r;
        k = ((k % spec_.a) + spec_.a) % spec_.a;
        if (k != 0) r.word.push_back({true, k});
        return r;
    }

    // |g| = sum of |n_i| over Z syllables; l1 norm on Z^d.
    int64_t word_length(const Element& g) const {
        check(g);
        int64_t s = 0;
        if (free_product()) {
            for (const auto& y : g.word)
                if (!y.torsion) s += iabs(y.e);
        } else {
            for (auto c : g.coords) s += iabs(c);
        }
        return s;
    }

    // Membership in W_a: e, or the last syllable is nonzero torsion or a positive Z power.
    bool in_W(const Element& g) const {
        if (!free_product()) throw std::invalid_argument("W_a is defined on the free product");
        if (g.word.empty()) return true;
        const auto& last = g.word.back();
        return last.torsion || last.e > 0;
    }

    // All elements with word length exactly m (free product) or l_inf radius exactly m (Z^d),
    // in canonical order.
    std::vector<Element> shell(int64_t m) const {
        std::vector<Element> out;
        if (free_product()) {
            Element cur;
            gen_words(cur, m, out);
            std::sort(out.begin(), out.end(), [](const Element& x, const Element& y) {
                return word_less(x, y);
            });
            return out;
        }
        std::vector<int64_t> c(spec_.d);
        gen_box_shell(c, 0, m, false, out);
        return out;
    }

    // Ball {|g| <= m} (free product) or the box [-m, m]^d, in canonical order.
    std::vector<Element> ball(int64_t m) const {
        std::vector<Element> out;
        for (int64_t r = 0; r <= m; ++r) {
            auto s = shell(r);
            out.insert(out.end(), s.begin(), s.end());
        }
        return out;
    }

    uint64_t index(const Element& g) const {
        check(g);
        if (free_product()) {
            int64_t m = word_length(g);
            uint64_t base = m == 0 ? 0 : ball_count(spec_.a, m - 1);
            auto sh = shell(m);
            auto it = std::lower_bound(sh.begin(), sh.end(), g, word_less);
            return base + static_cast<uint64_t>(it - sh.begin());
        }
        if (spec_.d == 1) {
            int64_t n = g.coords[0];
            if (n == 0) return 0;
            return n > 0 ? static_cast<uint64_t>(2 * n) : static_cast<uint64_t>(-2 * n - 1);
        }
        int64_t r = 0;
        for (auto c : g.coords) r = std::max(r, iabs(c));
        uint64_t base = r == 0 ? 0 : ipow(2 * r - 1, spec_.d);
        uint64_t rank = 0;
        bool hit = false;
        for (int i = 0; i < spec_.d; ++i) {
            for (int64_t v = -r; v < g.coords[i]; ++v)
                rank += shell_count(spec_.d - i - 1, r, hit || iabs(v) == r);
            hit = hit || iabs(g.coords[i]) == r;
        }
        return base + rank;
    }

    Element element(uint64_t idx) const {
        if (free_product()) {
            int64_t m = 0;
            uint64_t base = 0;
            while (true) {
                uint64_t next = ball_count(spec_.a, m);
                if (idx < next) break;
                base = next;
                ++m;
            }
            return shell(m)[idx - base];
        }
        if (spec_.d == 1) {
            auto n = static_cast<int64_t>((idx + 1) / 2);
            return z_elem(idx % 2 == 0 ? n : -n);
        }
        int64_t r = 0;
        while (ipow(2 * r + 1, spec_.d) <= idx) ++r;
        uint64_t rank = idx - (r == 0 ? 0 : ipow(2 * r - 1, spec_.d));
        Element g = identity();
        bool hit = false;
        for (int i = 0; i < spec_.d; ++i) {
            for (int64_t v = -r; v <= r; ++v) {
                uint64_t cnt = shell_count(spec_.d - i - 1, r, hit || iabs(v) == r);
                if (rank < cnt) {
                    g.coords[i] = v;
                    hit = hit || iabs(v) == r;
                    break;
                }
                rank -= cnt;
            }
        }
        return g;
    }

    std::string label(const Element& g) const {
        check(g);
        std::string s;
        if (free_product()) {
            if (g.word.empty()) return "e";
            for (const auto& y : g.word) {
                s += y.torsion ? "s" : "t";
                if (y.e != 1) s += "^" + std::to_string(y.e);
            }
            return s;
        }
        if (spec_.d == 1) return std::to_string(g.coords[0]);
        s = "(";
        for (int i = 0; i < spec_.d; ++i) s += (i ? "," : "") + std::to_string(g.coords[i]);
        return s + ")";
    }

    // F_n = [-2^n, 2^n]^d.
    std::vector<Element> folner(int n) const {
        if (free_product()) throw std::invalid_argument("free product is not amenable");
        if (n < 0 || n > 30) throw std::invalid_argument("folner index out of range");
        return ball(int64_t{1} << n);
    }

    // |gF \ F| / |F|.
    double boundary_ratio(const std::vector<Element>& F, const Element& g) const {
        std::set<Element> S(F.begin(), F.end());
        size_t out = 0;
        for (const auto& f : F)
            if (!S.count(mul(g, f))) ++out;
        return static_cast<double>(out) / static_cast<double>(F.size());
    }

    // |gF △ F| / |F|, twice the one-sided ratio.
    double symdiff_ratio(const std::vector<Element>& F, const Element& g) const {
        return 2.0 * boundary_ratio(F, g);
    }

    static uint64_t ball_count(int a, int64_t m) {
        if (a < 2 || m < 0) throw std::invalid_argument("ball_count requires a >= 2, m >= 0");
        if (m == 0) return static_cast<uint64_t>(a);
        // (a/(a-1)) (a (2a-1)^m - 1); the numerator a(a(2a-1)^m - 1) is divisible by a-1.
        uint64_t q = ipow(2 * a - 1, m);
        uint64_t num = static_cast<uint64_t>(a) * (static_cast<uint64_t>(a) * q - 1);
        return num / static_cast<uint64_t>(a - 1);
    }

private:
    GroupSpec spec_;

    void check(const Element& g) const {
        if (!contains(g)) throw std::invalid_argument("element does not belong to this group");
    }

    void push_reduce(std::vector<Syllable>& w, Syllable s) const {
        if (!w.empty() && w.back().torsion == s.torsion) {
            Syllable t = w.back();
            w.pop_back();
            int64_t e = t.e + s.e;
            if (s.torsion) e %= spec_.a;
            if (e != 0) w.push_back({s.torsion, e});
            return;
        }
        w.push_back(s);
    }

    static uint64_t ipow(int64_t b, int64_t e) {
        uint64_t r = 1;
        for (int64_t i = 0; i < e; ++i) r *= static_cast<uint64_t>(b);
        return r;
    }

    // Number of completions of k remaining coordinates inside [-r,r] so that the full point
    // has l_inf norm exactly r.
    static uint64_t shell_count(int k, int64_t r, bool hit) {
        if (hit) return ipow(2 * r + 1, k);
        if (r == 0) return 1;
        return ipow(2 * r + 1, k) - ipow(2 * r - 1, k);
    }

    void gen_box_shell(std::vector<int64_t>& c, int i, int64_t r, bool hit,
                       std::vector<Element>& out) const {
        if (i == spec_.d) {
            if (hit || r == 0) out.push_back(Element{c, {}});
            return;
        }
        for (int64_t v = -r; v <= r; ++v) {
            c[i] = v;
            gen_box_shell(c, i + 1, r, hit || iabs(v) == r, out);
        }
    }

    void gen_words(Element& cur, int64_t remaining, std::vector<Element>& out) const {
        if (remaining == 0) out.push_back(cur);
        bool last_torsion = !cur.word.empty() && cur.word.back().torsion;
        bool last_free = !cur.word.empty() && !cur.word.back().torsion;
        if (!last_torsion) {
            for (int64_t k = 1; k < spec_.a; ++k) {
                cur.word.push_back({true, k});
                gen_words(cur, remaining, out);
                cur.word.pop_back();
            }
        }
        if (!last_free) {
            for (int64_t n = 1; n <= remaining; ++n) {
                for (int64_t sgn : {-1, 1}) {
                    cur.word.push_back({false, sgn * n});
                    gen_words(cur, remaining - n, out);
                    cur.word.pop_back();
                }
            }
        }
    }

    static bool word_less(const Element& x, const Element& y) {
        if (x.word.size() != y.word.size()) return x.word.size() < y.word.size();
        return x.word < y.word;
    }
};

}  // namespace nsb
