"""Client/server handshake driven in memory: happy path, message-order safety,
replay and splice defenses, and the forward-secrecy harness."""

import pytest

from vsim import protocol
from vsim.crypto import primitives
from vsim.errors import (
    AttestRejected,
    AttestRequestMismatch,
    AuthFailure,
    ChannelAuthFailure,
    DecryptFailure,
    ProfileParseError,
    ProtocolError,
    ServerNonceMismatch,
    SessionRejected,
)
from vsim.protocol import ErrorCode, MsgType
from vsim.vsim_core.provisioning import AttestRequest, ClientSession, ProvisioningState


class TestHappyPath:
    def test_full_handshake_delivers_profile(self, scenario):
        token, profile = scenario.add_profile()
        client = scenario.new_client_session(token)
        server = scenario.new_server_session()
        delivered = scenario.run_handshake(client, server)
        assert delivered == profile
        assert client.state is ProvisioningState.PROVISIONED
        assert scenario.inventory.get(token).claimed
        assert scenario.inventory.get(token).claimed_by_pseudonym is not None

    def test_device_provision_seals_profile(self, scenario):
        token, profile = scenario.add_profile(supi="001010000000002")
        device = scenario.new_device("happy")

        class LoopTransport:
            def __init__(self, server):
                self.server = server
                self.reply = None

            def send_frame(self, frame):
                msg_type, _ = protocol.decode_frame(frame)
                if msg_type == MsgType.CLIENT_HELLO:
                    self.reply = self.server.on_client_hello(frame)
                else:
                    self.reply = self.server.on_client_attest(frame)

            def recv_frame(self):
                return protocol.decode_frame(self.reply)

        transport = LoopTransport(scenario.new_server_session())
        delivered = device.provision(
            transport, scenario.static_pk, token, scenario.expected_request()
        )
        assert delivered == profile
        assert device.load_profile() == profile


class TestStateMachineSafety:
    def test_m2_before_m1(self, scenario):
        token, _ = scenario.add_profile(supi="001010000000003")
        client = scenario.new_client_session(token)
        with pytest.raises(ProtocolError):
            client.consume_m2(protocol.encode_frame(MsgType.SERVER_HELLO, b"x"))
        assert client.state is ProvisioningState.FAILED

    def test_duplicate_m2(self, scenario):
        token, _ = scenario.add_profile(supi="001010000000004")
        client = scenario.new_client_session(token)
        server = scenario.new_server_session()
        m2 = server.on_client_hello(client.build_m1())
        client.consume_m2(m2)
        with pytest.raises(ProtocolError):
            client.consume_m2(m2)
        assert client.state is ProvisioningState.FAILED

    def test_m4_before_m3(self, scenario):
        token, _ = scenario.add_profile(supi="001010000000005")
        client = scenario.new_client_session(token)
        with pytest.raises(ProtocolError):
            client.consume_m4(protocol.encode_frame(MsgType.PROFILE_DELIVERY, b"x"))
        assert client.state is ProvisioningState.FAILED

    def test_failed_client_cannot_continue(self, scenario):
        token, _ = scenario.add_profile(supi="001010000000006")
        client = scenario.new_client_session(token)
        client.build_m1()
        with pytest.raises(ProtocolError):
            client.consume_m2(protocol.encode_frame(MsgType.SERVER_HELLO, b"garbage"))
        with pytest.raises(ProtocolError):
            client.build_m3()

    def test_server_attest_before_hello(self, scenario):
        server = scenario.new_server_session()
        with pytest.raises(SessionRejected) as exc_info:
            server.on_client_attest(protocol.encode_frame(MsgType.CLIENT_ATTEST, b"x"))
        assert exc_info.value.code == ErrorCode.PROTOCOL_VIOLATION

    def test_nothing_stored_on_failure(self, scenario, tmp_path):
        token, _ = scenario.add_profile(supi="001010000000007")
        device = scenario.new_device("failed")

        class BrokenTransport:
            def send_frame(self, frame):
                pass

            def recv_frame(self):
                return MsgType.SERVER_HELLO, b"garbage"

        with pytest.raises(ChannelAuthFailure):
            device.provision(BrokenTransport(), scenario.static_pk, token,
                             scenario.expected_request())
        assert not device.is_provisioned()


class TestReplayAndSplice:
    def test_recorded_m2_into_new_session_nonce_mismatch(self, scenario):
        # new session reuses the old ephemeral key (so decryption works) but a
        # fresh nonce; the stale echo must be caught
        token, _ = scenario.add_profile(supi="001010000000008")
        rng = scenario.rng
        nonce1, nonce2 = rng.bytes(32), rng.bytes(32)
        esk, epk = primitives.dh_keygen(rng)

        client1 = scenario.new_client_session(token)
        client1.inject_ephemerals(nonce1, esk, epk)
        server = scenario.new_server_session()
        recorded_m2 = server.on_client_hello(client1.build_m1())

        client2 = scenario.new_client_session(token)
        client2.inject_ephemerals(nonce2, esk, epk)
        client2.build_m1()
        with pytest.raises(ServerNonceMismatch):
            client2.consume_m2(recorded_m2)
        assert client2.state is ProvisioningState.FAILED

    def test_m2_for_other_ephemeral_fails_decrypt(self, scenario):
        # without the recorded session's ephemeral secret the replay dies earlier
        token, _ = scenario.add_profile(supi="001010000000009")
        client1 = scenario.new_client_session(token)
        server = scenario.new_server_session()
        recorded_m2 = server.on_client_hello(client1.build_m1())

        client2 = scenario.new_client_session(token)
        client2.build_m1()
        with pytest.raises(ChannelAuthFailure):
            client2.consume_m2(recorded_m2)

    def test_m3_spliced_across_sessions(self, scenario):
        token_a, _ = scenario.add_profile(supi="001010000000010")
        token_b, _ = scenario.add_profile(supi="001010000000011")
        client_a = scenario.new_client_session(token_a)
        server_a = scenario.new_server_session()
        client_a.consume_m2(server_a.on_client_hello(client_a.build_m1()))
        m3_a = client_a.build_m3()

        client_b = scenario.new_client_session(token_b)
        server_b = scenario.new_server_session()
        client_b.consume_m2(server_b.on_client_hello(client_b.build_m1()))
        with pytest.raises(SessionRejected) as exc_info:
            server_b.on_client_attest(m3_a)
        assert exc_info.value.code in (ErrorCode.CHANNEL_AUTH_FAILURE, ErrorCode.NONCE_MISMATCH)
        assert not scenario.inventory.get(token_b).claimed

    def test_byte_identical_m1_rejected(self, scenario):
        token, _ = scenario.add_profile(supi="001010000000012")
        client = scenario.new_client_session(token)
        m1 = client.build_m1()
        server1 = scenario.new_server_session()
        server1.on_client_hello(m1)
        server2 = scenario.new_server_session()
        with pytest.raises(SessionRejected) as exc_info:
            server2.on_client_hello(m1)
        assert exc_info.value.code == ErrorCode.REPLAY_DETECTED


class TestClientFailureModes:
    def test_wrong_session_key_on_m4(self, scenario):
        token, _ = scenario.add_profile(supi="001010000000013")
        client = scenario.new_client_session(token)
        server = scenario.new_server_session()
        client.consume_m2(server.on_client_hello(client.build_m1()))
        client.build_m3()
        bogus = primitives.aead_seal(
            scenario.rng.bytes(32),
            protocol.aead_nonce(0, from_server=True),
            protocol.aead_ad(MsgType.PROFILE_DELIVERY),
            b"not for you",
        )
        with pytest.raises(ChannelAuthFailure):
            client.consume_m4(protocol.encode_frame(MsgType.PROFILE_DELIVERY, bogus))
        assert client.state is ProvisioningState.FAILED

    def test_attest_request_mismatch(self, scenario):
        token, _ = scenario.add_profile(supi="001010000000014")
        client = ClientSession(
            scenario.ctx,
            scenario.static_pk,
            token,
            AttestRequest(tee_version=9, basename=scenario.config.basename),
            scenario.rng,
        )
        server = scenario.new_server_session()
        m2 = server.on_client_hello(client.build_m1())
        with pytest.raises(AttestRequestMismatch):
            client.consume_m2(m2)

    def test_server_error_frame_maps_to_exception(self, scenario):
        token, _ = scenario.add_profile(supi="001010000000015")
        client = scenario.new_client_session(token)
        client.build_m1()
        with pytest.raises(AttestRejected):
            client.consume_m2(protocol.encode_error(ErrorCode.ATTEST_REVOKED_BY_KEY))

    def test_malformed_profile_in_m4(self, scenario):
        token, _ = scenario.add_profile(supi="001010000000016")
        client = scenario.new_client_session(token)
        server = scenario.new_server_session()
        client.consume_m2(server.on_client_hello(client.build_m1()))
        client.build_m3()
        # a frame sealed under the right key but carrying junk
        bogus = primitives.aead_seal(
            client._session_key,
            protocol.aead_nonce(0, from_server=True),
            protocol.aead_ad(MsgType.PROFILE_DELIVERY),
            b"\x00\x05 junk",
        )
        with pytest.raises(ProfileParseError):
            client.consume_m4(protocol.encode_frame(MsgType.PROFILE_DELIVERY, bogus))


class TestForwardSecrecy:
    def test_transcript_plus_static_key_cannot_open_delivery(self, scenario):
        """An attacker holding the full transcript and the provisioner's
        long-term private key gets M1's plaintext but cannot open M4."""
        token, _ = scenario.add_profile(supi="001010000000017")
        client = scenario.new_client_session(token)
        server = scenario.new_server_session()
        m1 = client.build_m1()
        m2 = server.on_client_hello(m1)
        client.consume_m2(m2)
        m3 = client.build_m3()
        m4 = server.on_client_attest(m3)
        client.consume_m4(m4)

        static_sk = scenario.static_sk
        _, m1_payload = protocol.decode_frame(m1)
        # the static key does open M1 (that is its job) ...
        m1_plain = primitives.pk_decrypt(static_sk, m1_payload)
        nonce_c, epk_c, leaked_token = protocol.parse_hello_plaintext(m1_plain)
        assert leaked_token == token
        # ... but M2 is sealed to the client ephemeral, out of reach
        _, m2_payload = protocol.decode_frame(m2)
        with pytest.raises(DecryptFailure):
            primitives.pk_decrypt(static_sk, m2_payload)
        # and no key derivable from (transcript, static key) opens M4
        transcript_hash = primitives.hash_bytes(m1 + m2)
        _, m4_payload = protocol.decode_frame(m4)
        candidate_ikms = [
            m1_plain,
            nonce_c,
            epk_c,
            transcript_hash,
            primitives.hash_bytes(m1_plain),
            static_sk.to_bytes(32, "big"),
            primitives.hash_bytes(static_sk.to_bytes(32, "big") + transcript_hash),
            bytes(32),
        ]
        for ikm in candidate_ikms:
            key = primitives.kdf(ikm, b"vsim-session" + transcript_hash, 32)
            with pytest.raises(AuthFailure):
                primitives.aead_open(
                    key,
                    protocol.aead_nonce(0, from_server=True),
                    protocol.aead_ad(MsgType.PROFILE_DELIVERY),
                    m4_payload,
                )
