#include <doctest.h>

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pvalert/config.hpp"
#include "pvalert/error.hpp"
#include "pvalert/ingest.hpp"
#include "pvalert/ip.hpp"
#include "pvalert/snapshot.hpp"
#include "pvalert/text.hpp"

using namespace pvalert;

namespace {

IpAddress ip(std::string_view s) { return *IpAddress::parse(s); }

const InternalPredicate& internal() {
  static const InternalPredicate p = InternalPredicate::parse("100.0.0.0/8");
  return p;
}

}  // namespace

TEST_CASE("addresses and prefixes") {
  CHECK(ip("192.168.1.100").to_string() == "192.168.1.100");
  CHECK(ip("2001:db8::1").family() == IpAddress::Family::V6);
  CHECK_FALSE(IpAddress::parse("300.1.1.1").has_value());
  CHECK_FALSE(IpAddress::parse("").has_value());
  const auto c = *Cidr::parse("100.0.0.0/8");
  CHECK(c.contains(ip("100.200.3.4")));
  CHECK_FALSE(c.contains(ip("101.0.0.1")));
  CHECK_FALSE(c.contains(ip("::ffff:100.0.0.1")));
  CHECK(Cidr::parse("10.1.2.3")->contains(ip("10.1.2.3")));
  CHECK(Cidr::parse("0.0.0.0/0")->contains(ip("8.8.8.8")));
  CHECK_FALSE(Cidr::parse("10.0.0.0/33").has_value());
  CHECK(Cidr::parse("2001:db8::/32")->contains(ip("2001:db8:1::5")));
  CHECK_THROWS_AS(InternalPredicate(std::vector<Cidr>{}), ConfigError);
  CHECK_THROWS_AS(InternalPredicate::parse("100.0.0.0/8,nonsense"), ConfigError);
}

TEST_CASE("parse a clock-time flow row") {
  const auto schema = FlowSchema::standard();
  const auto f = parse_flow("09:58:32.912,tcp,192.168.1.100,59860,172.16.100.10,80,508526,1186562,1695088", schema);
  CHECK(f.time == doctest::Approx(9 * 3600 + 58 * 60 + 32.912));
  CHECK(f.protocol == "tcp");
  CHECK(f.src_ip == ip("192.168.1.100"));
  CHECK(f.src_port == 59860);
  CHECK(f.dst_ip == ip("172.16.100.10"));
  CHECK(f.dst_port == 80);
  CHECK(f.src_bytes == 508526);
  CHECK(f.dst_bytes == 1186562);
  CHECK(f.tot_bytes == 1695088);
  CHECK_FALSE(f.label.has_value());

  auto dated = schema;
  dated.date_offset = 1000.0;
  CHECK(parse_flow("00:00:01,tcp,1.1.1.1,1,2.2.2.2,2,3,4,7", dated).time == 1001.0);
  CHECK(parse_flow("1700000000.25,tcp,1.1.1.1,1,2.2.2.2,2,3,4,7", dated).time == 1700000000.25);
}

TEST_CASE("garbled fields are parse errors") {
  const auto schema = FlowSchema::standard();
  CHECK_THROWS_AS(parse_flow("1,tcp,1.1.1.1,1,2.2.2.2,2,abc,4,7", schema), InputError);
  CHECK_THROWS_AS(parse_flow("1,tcp,1.1.1.1,70000,2.2.2.2,2,3,4,7", schema), InputError);
  CHECK_THROWS_AS(parse_flow("1,tcp,1.1.1.1,1,2.2.2.2,2,3,4", schema), InputError);
  CHECK_THROWS_AS(parse_flow("1,tcp,not-an-ip,1,2.2.2.2,2,3,4,7", schema), InputError);
  CHECK_THROWS_AS(parse_flow("00:61:00,tcp,1.1.1.1,1,2.2.2.2,2,3,4,7", schema), InputError);
}

TEST_CASE("headers map columns by name") {
  const auto s = FlowSchema::from_header("Label;DstBytes;SrcBytes;DstPort;DstIP;SrcPort;SrcIP;Proto;Time", ';');
  CHECK(s.label == 0);
  CHECK(s.time == 8);
  CHECK(s.totbytes == FlowSchema::kAbsent);
  const auto f = parse_flow("attack;5;10;22;100.0.0.1;4000;8.8.8.8;tcp;12.5", s);
  CHECK(f.label == Label::Attack);
  CHECK(f.tot_bytes == 15);
  CHECK(f.dst_port == 22);
  CHECK_THROWS_AS(FlowSchema::from_header("time,proto,srcip"), ConfigError);
  CHECK_THROWS_AS(FlowSchema::from_header("time,time,proto,srcip,srcport,dstip,dstport,srcbytes,dstbytes"),
                  ConfigError);
}

TEST_CASE("serialize then parse is the identity") {
  std::mt19937_64 rng(12);
  for (bool with_label : {false, true}) {
    for (char delim : {',', '\t', '|'}) {
      const auto schema = FlowSchema::standard(delim, with_label);
      for (int i = 0; i < 500; ++i) {
        FlowRecord f;
        f.time = static_cast<double>(rng() % 100000000) / 1000.0 + std::ldexp(static_cast<double>(rng() % 1000), -20);
        f.protocol = i % 2 ? "udp" : "tcp";
        f.src_ip = IpAddress::v4(static_cast<std::uint32_t>(rng()));
        f.dst_ip = i % 5 == 0 ? ip("2001:db8::" + std::to_string(i % 90 + 1)) : IpAddress::v4(static_cast<std::uint32_t>(rng()));
        f.src_port = static_cast<std::uint16_t>(rng());
        f.dst_port = static_cast<std::uint16_t>(rng());
        f.src_bytes = rng() % 10000000000ULL;
        f.dst_bytes = rng() % 10000000000ULL;
        f.tot_bytes = f.src_bytes + f.dst_bytes;
        if (with_label) f.label = i % 3 ? Label::Benign : Label::Attack;
        CHECK(parse_flow(serialize_flow(f, schema), schema) == f);
      }
    }
  }
}

TEST_CASE("reader counts blank lines, comments and bad lines without aborting") {
  std::istringstream in(
      "# generator note\n"
      "time,proto,srcip,srcport,dstip,dstport,srcbytes,dstbytes,totbytes\n"
      "\n"
      "1,tcp,100.0.0.1,4000,8.8.8.8,80,10,20,30\n"
      "2,tcp,100.0.0.1,4000,8.8.8.8,80,abc,20,30\n"
      "# comment\n"
      "3,tcp,100.0.0.1,4000,8.8.8.8,80,10,20,31\n"
      "   \n"
      "4,udp,8.8.8.8,53,100.0.0.2,53,1,2,3\n");
  FlowReader reader(in, {});
  std::vector<FlowRecord> got;
  while (auto f = reader.next()) got.push_back(*f);
  REQUIRE(got.size() == 3);
  CHECK(got[1].tot_bytes == 30);
  const auto& s = reader.stats();
  CHECK(s.records == 3);
  CHECK(s.parse_errors == 1);
  CHECK(s.tot_bytes_mismatches == 1);
  CHECK(s.skipped == 4);
  CHECK(reader.warnings().size() == 2);
}

TEST_CASE("reader ordering and reorder buffer") {
  const std::string body =
      "time,proto,srcip,srcport,dstip,dstport,srcbytes,dstbytes\n"
      "10,tcp,1.1.1.1,1,2.2.2.2,2,1,1\n"
      "12,tcp,1.1.1.1,1,2.2.2.2,2,1,1\n"
      "11,tcp,1.1.1.1,1,2.2.2.2,2,1,1\n"
      "13,tcp,1.1.1.1,1,2.2.2.2,2,1,1\n";
  {
    std::istringstream in(body);
    FlowReader reader(in, {});
    std::vector<double> t;
    while (auto f = reader.next()) t.push_back(f->time);
    CHECK(t == std::vector<double>{10, 12, 13});
    CHECK(reader.stats().ordering_errors == 1);
  }
  {
    std::istringstream in(body);
    ReaderOptions o;
    o.reorder_tolerance = 2.0;
    FlowReader reader(in, o);
    std::vector<double> t;
    while (auto f = reader.next()) t.push_back(f->time);
    CHECK(t == std::vector<double>{10, 11, 12, 13});
    CHECK(reader.stats().ordering_errors == 0);
  }
  std::istringstream empty("");
  CHECK_THROWS_AS(FlowReader(empty, {}), ConfigError);
}

TEST_CASE("label files are keyed by line number") {
  std::istringstream lf("3,attack\n4,benign\n");
  const auto labels = load_label_file(lf);
  std::istringstream in(
      "time,proto,srcip,srcport,dstip,dstport,srcbytes,dstbytes\n"
      "1,tcp,1.1.1.1,1,2.2.2.2,2,1,1\n"
      "2,tcp,1.1.1.1,1,2.2.2.2,2,1,1\n"
      "3,tcp,1.1.1.1,1,2.2.2.2,2,1,1\n");
  ReaderOptions o;
  o.labels = &labels;
  FlowReader reader(in, o);
  CHECK_FALSE(reader.next()->label.has_value());
  CHECK(reader.next()->label == Label::Attack);
  CHECK(reader.next()->label == Label::Benign);
  std::istringstream bad("x,attack\n");
  CHECK_THROWS_AS(load_label_file(bad), InputError);
  CHECK(parse_label("MALICIOUS") == Label::Attack);
  CHECK(parse_label("0") == Label::Benign);
}

TEST_CASE("routing") {
  FlowRecord out;
  out.src_ip = ip("100.0.0.5");
  out.dst_ip = ip("8.8.8.8");
  out.dst_port = 80;
  out.src_bytes = 100;
  out.dst_bytes = 300;
  const auto r = route(out, internal());
  REQUIRE(r.size() == 2);
  CHECK(r[0].key == DetectorKey{ip("100.0.0.5"), Feature::Pcr});
  CHECK(r[0].bin == 2);
  CHECK(r[1].key == DetectorKey{ip("100.0.0.5"), Feature::Port});
  CHECK(r[1].bin == 79);

  FlowRecord ext = out;
  ext.src_ip = ip("9.9.9.9");
  CHECK(route(ext, internal()).size() == 0);

  FlowRecord both = out;
  both.dst_ip = ip("100.0.0.9");
  const auto rb = route(both, internal());
  REQUIRE(rb.size() == 4);
  CHECK(rb[2].key.entity == ip("100.0.0.9"));
  CHECK(rb[3].bin == 1024 + 79);
  CHECK(rb[2].bin == rb[0].bin);

  FlowRecord ephemeral = out;
  ephemeral.dst_port = 59860;
  CHECK(route(ephemeral, internal()).size() == 1);
  FlowRecord silent = out;
  silent.src_bytes = silent.dst_bytes = 0;
  CHECK(route(silent, internal()).size() == 1);
}

TEST_CASE("route only emits internal entities") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 5000; ++i) {
    FlowRecord f;
    f.src_ip = IpAddress::v4(rng() % 2 ? (100u << 24) | static_cast<std::uint32_t>(rng() % 65536) : static_cast<std::uint32_t>(rng()));
    f.dst_ip = IpAddress::v4(rng() % 2 ? (100u << 24) | static_cast<std::uint32_t>(rng() % 65536) : static_cast<std::uint32_t>(rng()));
    f.dst_port = static_cast<std::uint16_t>(rng() % 2000);
    f.src_bytes = rng() % 3;
    f.dst_bytes = rng() % 3;
    const auto r = route(f, internal());
    CHECK(r.size() <= 4);
    for (const auto& o : r) {
      CHECK(internal().contains(o.key.entity));
      CHECK(o.bin < (o.key.feature == Feature::Port ? kPortBins : kPcrBins));
    }
  }
}

TEST_CASE("config keys and values") {
  const auto c = Config::parse_string(
      "# comment\n"
      "internal_cidrs = 100.0.0.0/8, 10.0.0.0/8\n"
      "regulator.beta = 0.01   # trailing comment\n"
      "engine.workers = 4\n");
  CHECK(c.get_string("internal_cidrs", "") == "100.0.0.0/8, 10.0.0.0/8");
  CHECK(c.get_double("regulator.beta", 0) == 0.01);
  CHECK(c.get_uint("engine.workers", 1) == 4);
  CHECK(c.get_uint("engine.seed", 9) == 9);
  CHECK_THROWS_AS(Config::parse_string("nonsense.key = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_string("regulator.beta\n"), ConfigError);
  CHECK_THROWS_AS((void)Config::parse_string("regulator.beta = x\n").get_double("regulator.beta", 0), ConfigError);
  CHECK_THROWS_AS((void)Config::parse_string("engine.workers = -2\n").get_uint("engine.workers", 0), ConfigError);
  CHECK(parse_delimiter("tab") == '\t');
  CHECK(parse_delimiter(";") == ';');
  CHECK_THROWS_AS(parse_delimiter("::"), ConfigError);
}

TEST_CASE("multinomial snapshots round-trip exactly") {
  std::vector<MultinomialEntry> entries;
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5; ++i) {
    StreamingMultinomial port(kPortBins);
    StreamingMultinomial p(kPcrBins);
    for (int j = 0; j < 1000; ++j) {
      port.update(rng() % 40);
      p.update(rng() % 10);
    }
    entries.emplace_back(DetectorKey{IpAddress::v4((100u << 24) + 5 - i), Feature::Port}, port);
    entries.emplace_back(DetectorKey{IpAddress::v4((100u << 24) + 5 - i), Feature::Pcr}, p);
  }
  std::ostringstream out;
  write_multinomials(out, entries);
  std::istringstream in(out.str());
  const auto back = read_multinomials(in);
  REQUIRE(back.size() == entries.size());
  for (const auto& [key, det] : entries) {
    const auto it = std::find_if(back.begin(), back.end(), [&](const auto& e) { return e.first == key; });
    REQUIRE(it != back.end());
    CHECK(std::equal(det.counts().begin(), det.counts().end(), it->second.counts().begin(), it->second.counts().end()));
  }
  std::ostringstream again;
  write_multinomials(again, back);
  CHECK(again.str() == out.str());
  std::istringstream truncated(out.str().substr(0, out.str().size() / 2));
  CHECK_THROWS_AS(read_multinomials(truncated), InputError);
}

TEST_CASE("gaussian detector snapshots resume bit-identically") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  GaussianDetectorOptions o;
  o.warmup = 20;
  o.mcd.starts = 5;
  StreamingGaussianDetector det(3, o);
  std::vector<Eigen::VectorXd> xs;
  for (int i = 0; i < 60; ++i) xs.push_back(Eigen::Vector3d(z(rng), z(rng), 3 * z(rng)));
  for (int i = 0; i < 30; ++i) det.step(xs[i]);
  std::ostringstream out;
  write_gaussian_detector(out, det);
  std::istringstream in(out.str());
  auto resumed = read_gaussian_detector(in);
  for (int i = 30; i < 60; ++i) {
    const auto a = det.step(xs[i]);
    const auto b = resumed.step(xs[i]);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(a->value() == b->value());
  }
}

TEST_CASE("text helpers") {
  CHECK(split("a,,b", ',') == std::vector<std::string_view>{"a", "", "b"});
  CHECK(trim("  x \t") == "x");
  CHECK(parse_double("1e-3") == 0.001);
  CHECK_FALSE(parse_double("1e-3x").has_value());
  CHECK_FALSE(parse_uint("-1").has_value());
  CHECK(parse_int("-12") == -12);
  for (double v : {0.1, 1.0 / 3, 1e-300, 123456.789, 2.5e17}) CHECK(parse_double(format_double(v)) == v);
}
