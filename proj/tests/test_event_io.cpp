#include <gtest/gtest.h>

#include "evkp/binary.hpp"
#include "evkp/error.hpp"
#include "evkp/event_io.hpp"
#include "test_support.hpp"

namespace evkp {
namespace {

using test::TempDirTest;

EventStream random_stream(Rng& rng, std::size_t count) {
  EventStream s;
  s.width = static_cast<std::uint16_t>(uniform_int(rng, 1, 1280));
  s.height = static_cast<std::uint16_t>(uniform_int(rng, 1, 720));
  std::uint64_t t = static_cast<std::uint64_t>(uniform_int(rng, 0, 1'000'000'000));
  for (std::size_t k = 0; k < count; ++k) {
    t += static_cast<std::uint64_t>(uniform_int(rng, 0, 50));
    s.events.push_back({t, static_cast<std::uint16_t>(uniform_index(rng, s.width)),
                        static_cast<std::uint16_t>(uniform_index(rng, s.height)),
                        static_cast<std::int8_t>(uniform_index(rng, 2) ? 1 : -1)});
  }
  return s;
}

TEST(EventCsv, PositivePolarityRow) {
  const EventStream s = parse_events_csv("100,3,4,1\n");
  ASSERT_EQ(s.events.size(), 1u);
  EXPECT_EQ(s.events[0], (Event{100, 3, 4, 1}));
}

TEST(EventCsv, ZeroPolarityMapsToNegative) {
  const EventStream s = parse_events_csv("100,3,4,0\n");
  ASSERT_EQ(s.events.size(), 1u);
  EXPECT_EQ(s.events[0], (Event{100, 3, 4, -1}));
}

TEST(EventCsv, AcceptsSignedPolarityAndHeader) {
  const EventStream s = parse_events_csv("t_us,x,y,p\n1,0,0,-1\n2,5,6,1\n");
  ASSERT_EQ(s.events.size(), 2u);
  EXPECT_EQ(s.events[0].p, -1);
  EXPECT_EQ(s.width, 6);
  EXPECT_EQ(s.height, 7);
}

TEST(EventCsv, HeaderOnlyAllowedOnFirstRow) {
  EXPECT_THROW(parse_events_csv("1,0,0,1\nt,x,y,p\n"), FormatError);
}

TEST(EventCsv, ExplicitSensorSizeBoundsChecked) {
  EventReadOptions opt;
  opt.width = 4;
  opt.height = 4;
  EXPECT_THROW(parse_events_csv("1,4,0,1\n", opt), FormatError);
  EXPECT_EQ(parse_events_csv("1,3,3,1\n", opt).width, 4);
}

TEST(EventCsv, RejectsBadPolarityAndFieldCount) {
  EXPECT_THROW(parse_events_csv("1,0,0,2\n"), FormatError);
  EXPECT_THROW(parse_events_csv("1,0,0\n"), FormatError);
}

TEST(EventCsv, RegressionBeyondSlackNamesTheEvent) {
  try {
    parse_events_csv("10,0,0,1\n20,0,0,1\n5,0,0,1\n");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("event 2"), std::string::npos) << e.what();
  }
}

TEST(EventCsv, RegressionWithinSlackIsResorted) {
  EventReadOptions opt;
  opt.slack_us = 20;
  const EventStream s = parse_events_csv("10,0,0,1\n20,1,0,1\n5,2,0,1\n", opt);
  ASSERT_EQ(s.events.size(), 3u);
  EXPECT_EQ(s.events[0].t, 5u);
  EXPECT_EQ(s.events[0].x, 2);
  EXPECT_EQ(s.events[2].t, 20u);
}

TEST(Evt1, EmptyStreamIsHeaderOnly) {
  EventStream s;
  s.width = 640;
  s.height = 480;
  EXPECT_EQ(encode_evt1(s).size(), kEvt1HeaderSize);
  EXPECT_EQ(kEvt1HeaderSize, 24u);
}

TEST(Evt1, OneEventAddsThirteenBytes) {
  EventStream s;
  s.width = 10;
  s.height = 10;
  s.events.push_back({7, 1, 2, -1});
  EXPECT_EQ(encode_evt1(s).size(), kEvt1HeaderSize + 13);
}

TEST(Evt1, RandomizedRoundTrip) {
  Rng rng(11);
  for (int c = 0; c < 50; ++c) {
    const EventStream s = random_stream(rng, static_cast<std::size_t>(uniform_int(rng, 0, 2000)));
    const auto bytes = encode_evt1(s);
    EXPECT_EQ(bytes.size(), kEvt1HeaderSize + kEvt1RecordSize * s.events.size());
    const EventStream back = decode_evt1(bytes);
    EXPECT_EQ(back, s);
    EXPECT_EQ(encode_evt1(back), bytes);
  }
}

TEST(Evt1, TruncatedFileReportsOffset) {
  EventStream s;
  s.width = s.height = 8;
  s.events = {{1, 0, 0, 1}, {2, 1, 1, -1}};
  auto bytes = encode_evt1(s);
  bytes.pop_back();
  try {
    decode_evt1(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
  }
}

TEST(Evt1, RejectsBadMagicVersionAndBounds) {
  EventStream s;
  s.width = s.height = 8;
  s.events = {{1, 7, 7, 1}};
  const auto good = encode_evt1(s);

  auto magic = good;
  magic[0] = 'X';
  EXPECT_THROW(decode_evt1(magic), FormatError);

  auto version = good;
  version[4] = 2;
  EXPECT_THROW(decode_evt1(version), FormatError);

  auto bounds = good;
  bounds[kEvt1HeaderSize + 8] = 8;  // x = 8 on an 8-wide sensor
  EXPECT_THROW(decode_evt1(bounds), FormatError);

  auto polarity = good;
  polarity[kEvt1HeaderSize + 12] = 0;
  EXPECT_THROW(decode_evt1(polarity), FormatError);

  auto padding = good;
  padding[13] = 1;
  EXPECT_THROW(decode_evt1(padding), FormatError);
}

TEST(Evt1, WriterValidatesStream) {
  EventStream s;
  s.width = s.height = 4;
  s.events = {{5, 0, 0, 1}, {4, 0, 0, 1}};
  EXPECT_THROW(encode_evt1(s), InvalidArgument);
  s.events = {{5, 4, 0, 1}};
  EXPECT_THROW(encode_evt1(s), InvalidArgument);
}

class EventFiles : public TempDirTest {};

TEST_F(EventFiles, GoldenThreeEventFileRoundTripsByteForByte) {
  const auto path = test::data_dir() / "events_3.evt1";
  const EventStream s = read_events(path, EventFormat::kEvt1);
  EXPECT_EQ(s.width, 32);
  EXPECT_EQ(s.height, 24);
  ASSERT_EQ(s.events.size(), 3u);
  EXPECT_EQ(s.events[0], (Event{100, 3, 4, 1}));
  EXPECT_EQ(s.events[1], (Event{150, 31, 0, -1}));
  EXPECT_EQ(s.events[2], (Event{150, 0, 23, 1}));
  write_events(s, dir() / "copy.evt1");
  EXPECT_EQ(read_file_bytes(dir() / "copy.evt1"), read_file_bytes(path));
}

TEST_F(EventFiles, GoldenEmptyFile) {
  const auto path = test::data_dir() / "events_empty.evt1";
  EXPECT_EQ(read_file_bytes(path).size(), 24u);
  const EventStream s = read_events(path, EventFormat::kEvt1);
  EXPECT_TRUE(s.events.empty());
  EXPECT_EQ(s.width, 640);
}

TEST_F(EventFiles, MissingFileIsIoError) {
  EXPECT_THROW(read_events(dir() / "nope.evt1", EventFormat::kEvt1), IoError);
}

TEST(Trajectory, IdentityRow) {
  const Trajectory t = parse_trajectory("0 0 0 0 0 0 0 1\n");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].t, 0.0);
  EXPECT_TRUE(t[0].position.isZero());
  EXPECT_TRUE(t[0].orientation.coeffs().isApprox(Eigen::Quaterniond::Identity().coeffs()));
}

TEST(Trajectory, CommentOnlyIsEmpty) {
  EXPECT_TRUE(parse_trajectory("# nothing here\n\n# still nothing\n").empty());
}

TEST(Trajectory, RejectsNonUnitQuaternion) {
  EXPECT_THROW(parse_trajectory("0 0 0 0 0 0 0 0.5\n"), FormatError);
}

TEST(Trajectory, RenormalizesNearlyUnitQuaternion) {
  const Trajectory t = parse_trajectory("1.5 1 2 3 0 0 0 1.0005\n");
  EXPECT_NEAR(t[0].orientation.norm(), 1.0, 1e-15);
}

TEST(Trajectory, RejectsDecreasingTimeAndBadRows) {
  EXPECT_THROW(parse_trajectory("1 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n"), FormatError);
  EXPECT_THROW(parse_trajectory("1 0 0 0 0 0 1\n"), FormatError);
  EXPECT_THROW(parse_trajectory("1 0 0 x 0 0 0 1\n"), FormatError);
}

TEST_F(EventFiles, TrajectoryRoundTrip) {
  Trajectory t;
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    PoseStamped p;
    p.t = 0.05 * k;
    p.position = Eigen::Vector3d(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    p.orientation = Eigen::Quaterniond(standard_normal(rng), standard_normal(rng), standard_normal(rng),
                                       standard_normal(rng))
                        .normalized();
    t.push_back(p);
  }
  write_trajectory(t, dir() / "traj.txt");
  const Trajectory back = read_trajectory(dir() / "traj.txt");
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_NEAR(back[k].t, t[k].t, 1e-12);
    EXPECT_TRUE(back[k].position.isApprox(t[k].position, 1e-15));
    EXPECT_TRUE(back[k].orientation.coeffs().isApprox(t[k].orientation.coeffs(), 1e-15));
  }
}

TEST(Intrinsics, PinholeWithoutDistortion) {
  const CameraIntrinsics k = parse_intrinsics(R"({"fx":200,"fy":200,"cx":120,"cy":90,"dist":[0,0,0,0]})");
  EXPECT_EQ(k.fx, 200.0);
  EXPECT_EQ(k.fy, 200.0);
  EXPECT_EQ(k.cx, 120.0);
  EXPECT_EQ(k.cy, 90.0);
  EXPECT_TRUE(k.distortion.isZero());
}

TEST(Intrinsics, NegativeFocalRejected) {
  EXPECT_THROW(parse_intrinsics(R"({"fx":-1,"fy":200,"cx":120,"cy":90,"dist":[0,0,0,0]})"), InvalidArgument);
}

TEST(Intrinsics, DistortionLengthChecked) {
  EXPECT_THROW(parse_intrinsics(R"({"fx":1,"fy":1,"cx":0,"cy":0,"dist":[0,0,0]})"), FormatError);
  EXPECT_THROW(parse_intrinsics(R"({"fx":1,"fy":1,"cx":0,"cy":0})"), FormatError);
  EXPECT_THROW(parse_intrinsics(R"({"fx":1,"fy":1,"cx":0,"dist":[0,0,0,0]})"), FormatError);
  EXPECT_THROW(parse_intrinsics("not json"), FormatError);
}

TEST_F(EventFiles, IntrinsicsRoundTrip) {
  const CameraIntrinsics k{310.5, 311.25, 319.0, 241.5, Eigen::Vector4d(-0.1, 0.02, 1e-4, -2e-4)};
  write_intrinsics(k, dir() / "k.json");
  const CameraIntrinsics back = read_intrinsics(dir() / "k.json");
  EXPECT_EQ(back.fx, k.fx);
  EXPECT_EQ(back.cy, k.cy);
  EXPECT_EQ(back.distortion, k.distortion);
}

}  // namespace
}  // namespace evkp
