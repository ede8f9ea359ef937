#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "canids/dataset.hpp"
#include "canids/traffic_synth.hpp"

using namespace canids;

namespace {

AmbientProfile one_signal(double period, ByteGenerator g0 = ByteGenerator::constant(7)) {
  AmbientProfile p;
  AmbientSignal s;
  s.can_id = 0x0D0;
  s.period = period;
  s.bytes.fill(ByteGenerator::constant(0));
  s.bytes[0] = g0;
  p.signals.push_back(s);
  return p;
}

bool sorted_by_time(const std::vector<CanFrame>& frames) {
  return std::is_sorted(frames.begin(), frames.end(),
                        [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
}

// Labels derived from the returned spec must coincide with the injected positions.
void expect_labels_match_injection(const InjectionResult& r) {
  const auto recs = label_frames(r.capture.frames, r.spec);
  const std::set<std::size_t> injected(r.injected.begin(), r.injected.end());
  for (std::size_t i = 0; i < recs.size(); ++i) ASSERT_EQ(recs[i].label == 1, injected.count(i) == 1) << "frame " << i;
}

}  // namespace

TEST(GenAmbient, CountIsDurationOverPeriod) {
  const Capture c = gen_ambient(one_signal(0.1), 1.0, 1);
  EXPECT_EQ(c.frames.size(), 10u);
  EXPECT_TRUE(sorted_by_time(c.frames));
  for (const auto& f : c.frames) {
    EXPECT_GE(f.timestamp, 0.0);
    EXPECT_LT(f.timestamp, 1.0);
  }
}

TEST(GenAmbient, CounterByte) {
  AmbientProfile p = one_signal(0.1, ByteGenerator::counter(256));
  p.jitter = 0.0;
  const Capture c = gen_ambient(p, 1.0, 1);
  for (std::size_t k = 0; k < c.frames.size(); ++k) EXPECT_EQ(c.frames[k].payload[0], k);
}

TEST(GenAmbient, NoisySensorStaysInRange) {
  const Capture c = gen_ambient(one_signal(0.001, ByteGenerator::noisy_sensor(250, 20)), 2.0, 3);
  std::set<int> seen;
  for (const auto& f : c.frames) {
    EXPECT_GE(f.payload[0], 230);
    seen.insert(f.payload[0]);
  }
  EXPECT_TRUE(seen.count(255));
}

TEST(GenAmbient, DeterministicPerSeed) {
  const auto p = default_ambient_profile();
  const Capture a = gen_ambient(p, 3.0, 11), b = gen_ambient(p, 3.0, 11), c = gen_ambient(p, 3.0, 12);
  EXPECT_EQ(a.frames, b.frames);
  EXPECT_NE(a.frames, c.frames);
}

TEST(GenAmbient, Errors) {
  try {
    gen_ambient(AmbientProfile{}, 1.0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyProfile);
  }
  EXPECT_THROW(gen_ambient(one_signal(0.0), 1.0, 1), Error);
  EXPECT_THROW(gen_ambient(one_signal(0.1), 0.0, 1), Error);
}

TEST(InjectFuzzing, RateTimesWindow) {
  const Capture base = gen_ambient(default_ambient_profile(), 3.0, 1);
  const auto r = inject_fuzzing(base, {100.0, {1.0, 2.0}}, Subset::FA, 5);
  EXPECT_EQ(r.injected.size(), 100u);
  EXPECT_EQ(r.capture.frames.size(), base.frames.size() + 100);
  EXPECT_TRUE(sorted_by_time(r.capture.frames));
  for (auto i : r.injected) {
    const auto& f = r.capture.frames[i];
    EXPECT_LE(f.can_id, kMaxStandardId);
    EXPECT_GE(f.timestamp, 1.0);
    EXPECT_LE(f.timestamp, 2.0);
  }
  expect_labels_match_injection(r);
}

TEST(InjectFuzzing, WindowOutOfRange) {
  const Capture base = gen_ambient(default_ambient_profile(), 3.0, 1);
  try {
    inject_fuzzing(base, {100.0, {2.0, 4.0}}, Subset::FA, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WindowOutOfRange);
  }
}

TEST(InjectFabrication, PeriodTimesWindow) {
  const Capture base = gen_ambient(default_ambient_profile(), 3.0, 1);
  FabricationSpec spec;
  spec.target_id = 0x0D0;
  spec.period = 0.01;
  spec.window = {1.0, 2.0};
  const auto r = inject_fabrication(base, spec, Subset::MSA);
  EXPECT_EQ(r.injected.size(), 100u);
  for (auto i : r.injected) {
    EXPECT_EQ(r.capture.frames[i].can_id, 0x0D0);
    EXPECT_EQ(r.capture.frames[i].payload, spec.payload);
  }
  EXPECT_TRUE(sorted_by_time(r.capture.frames));
  expect_labels_match_injection(r);
}

TEST(InjectFabrication, PayloadAbsentFromAmbient) {
  const Capture base = gen_ambient(default_ambient_profile(), 10.0, 2);
  const Payload ones{255, 255, 255, 255, 255, 255, 255, 255};
  for (const auto& f : base.frames) {
    if (f.can_id == 0x0D0) {
      ASSERT_NE(f.payload, ones);
    }
  }
}

TEST(InjectFabrication, EmptyWindowAndRange) {
  const Capture base = gen_ambient(default_ambient_profile(), 3.0, 1);
  FabricationSpec spec;
  spec.target_id = 0x0D0;
  spec.window = {1.5, 1.5};
  const auto r = inject_fabrication(base, spec, Subset::MSA);
  EXPECT_EQ(r.injected.size(), 0u);
  EXPECT_EQ(r.capture.frames, base.frames);
  spec.window = {-1.0, 1.0};
  EXPECT_THROW(inject_fabrication(base, spec, Subset::MSA), Error);
}

TEST(SynthesizeCorpus, SixSubsetsLabelledByIdentity) {
  const auto corpus = synthesize_corpus(SyntheticCorpusConfig{}, 9);
  ASSERT_EQ(corpus.size(), 6u);
  std::size_t total = 0, malicious = 0;
  for (const auto& sc : corpus) {
    EXPECT_EQ(sc.spec.subset, sc.subset);
    EXPECT_TRUE(sorted_by_time(sc.capture.frames));
    expect_labels_match_injection({sc.capture, sc.spec, sc.injected});
    // Fabricated payloads never occur in ambient traffic of the same id.
    if (sc.subset != Subset::FA) {
      const auto& e = sc.spec.entries.at(0);
      std::set<std::size_t> inj(sc.injected.begin(), sc.injected.end());
      for (std::size_t i = 0; i < sc.capture.frames.size(); ++i) {
        if (!inj.count(i) && sc.capture.frames[i].can_id == *e.can_id) {
          ASSERT_FALSE(e.pattern.matches(sc.capture.frames[i].payload));
        }
      }
    }
    total += sc.capture.frames.size();
    malicious += sc.injected.size();
  }
  EXPECT_GT(total, 45000u);
  const double share = static_cast<double>(malicious) / static_cast<double>(total);
  EXPECT_GT(share, 0.02);
  EXPECT_LT(share, 0.04);
}
